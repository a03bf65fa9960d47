//! Pairwise element classification for choosing integration rules.
//!
//! Classification is plain integer/`f64` work on the undeformed geometry and
//! is never evaluated with dual numbers: it selects *which* quadrature is
//! applied, not the values being integrated.

use rayon::prelude::*;

use super::{Mesh, Symmetry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PairClass {
    /// Collocation point lies on the source element.
    SelfPair,
    SharedEdge,
    SharedVertex,
    RegularNear,
    RegularFar,
}

/// Classes for every (collocation element, source element image) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyClass {
    n: usize,
    near_factor: f64,
    symmetry: Symmetry,
    /// One `n × n` row-major block per reflection (identity first).
    classes: Vec<PairClass>,
}

impl AdjacencyClass {
    #[inline]
    pub fn num_elements(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_images(&self) -> usize {
        self.classes.len() / (self.n * self.n).max(1)
    }

    pub fn near_factor(&self) -> f64 {
        self.near_factor
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Class of collocation element `i` against source element `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> PairClass {
        self.classes[i * self.n + j]
    }

    /// Class of collocation element `i` against the `image`-th reflection
    /// of source element `j`.
    #[inline]
    pub fn get_image(&self, image: usize, i: usize, j: usize) -> PairClass {
        self.classes[(image * self.n + i) * self.n + j]
    }

    /// Count of each class over all pairs (identity block only).
    pub fn histogram(&self) -> [usize; 5] {
        let mut h = [0; 5];
        for c in &self.classes[..self.n * self.n] {
            h[*c as usize] += 1;
        }
        h
    }
}

fn classify_one(shared: usize, dist: f64, reach: f64) -> PairClass {
    match shared {
        3 => PairClass::SelfPair,
        2 => PairClass::SharedEdge,
        1 => PairClass::SharedVertex,
        _ if dist < reach => PairClass::RegularNear,
        _ => PairClass::RegularFar,
    }
}

/// Classify all element pairs of `mesh` (no symmetry images).
pub fn classify_pairs(mesh: &Mesh<f64>, near_factor: f64) -> AdjacencyClass {
    classify_pairs_with_symmetry(mesh, near_factor, Symmetry::NONE)
}

/// Classify all element pairs, including pairs against the images of each
/// source element under the active symmetry reflections.
///
/// For an image pair, vertices shared with the reflected element are the
/// vertices that lie on the reflecting planes, so an element touching a
/// symmetry plane along an edge is `SharedEdge` with its own mirror image.
pub fn classify_pairs_with_symmetry(
    mesh: &Mesh<f64>,
    near_factor: f64,
    symmetry: Symmetry,
) -> AdjacencyClass {
    let n = mesh.num_elements();
    let reflections = symmetry.reflections();
    let fixed = symmetry.fixed_vertices(mesh);
    let elems = mesh.elements();
    let mut classes = vec![PairClass::RegularFar; reflections.len() * n * n];
    for (m, refl) in reflections.iter().enumerate() {
        let block = &mut classes[m * n * n..(m + 1) * n * n];
        let image_centroids: Vec<_> = mesh.centroids().iter().map(|&c| refl.apply(c)).collect();
        block.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            let ci = mesh.centroid(i);
            let di = mesh.diameter(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let shared = if refl.is_identity() {
                    elems[i].iter().filter(|v| elems[j].contains(v)).count()
                } else {
                    elems[i]
                        .iter()
                        .filter(|&&v| elems[j].contains(&v) && fixed[m][v])
                        .count()
                };
                let reach = near_factor * di.max(mesh.diameter(j));
                *slot = classify_one(shared, (ci - image_centroids[j]).norm(), reach);
            }
        });
    }
    AdjacencyClass { n, near_factor, symmetry, classes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_icosphere, make_revolution, ProfileSegment, RevolutionSpec};

    #[test]
    fn diagonal_is_self_and_classes_are_symmetric() {
        let m = make_icosphere(1, 1.0).unwrap();
        let c = classify_pairs(&m, 2.5);
        for i in 0..m.num_elements() {
            assert_eq!(c.get(i, i), PairClass::SelfPair);
            for j in 0..m.num_elements() {
                assert_eq!(c.get(i, j), c.get(j, i));
            }
        }
    }

    #[test]
    fn icosahedron_edge_neighbours_and_antipodes() {
        let m = make_icosphere(0, 1.0).unwrap();
        let c = classify_pairs(&m, 0.1);
        // faces 0 = [0, 11, 5] and 1 = [0, 5, 1] share edge 0-5
        assert_eq!(c.get(0, 1), PairClass::SharedEdge);
        // each icosahedron face has exactly 3 edge neighbours and 6 vertex neighbours
        for i in 0..20 {
            let row: Vec<_> = (0..20).map(|j| c.get(i, j)).collect();
            assert_eq!(row.iter().filter(|&&k| k == PairClass::SharedEdge).count(), 3);
            assert_eq!(row.iter().filter(|&&k| k == PairClass::SharedVertex).count(), 6);
        }
        // antipodal face: centroid distance vs 0.1 × edge length
        let anti = (0..20)
            .max_by(|&a, &b| {
                let da = (m.centroid(0) - m.centroid(a)).norm();
                let db = (m.centroid(0) - m.centroid(b)).norm();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let dist = (m.centroid(0) + m.centroid(anti)).norm();
        assert!(dist < 1e-12, "antipode centroid should be the negated centroid");
        let sep = (m.centroid(0) - m.centroid(anti)).norm();
        assert!(sep > 0.1 * m.diameter(0));
        assert_eq!(c.get(0, anti), PairClass::RegularFar);
    }

    #[test]
    fn near_threshold_follows_factor() {
        let m = make_icosphere(2, 1.0).unwrap();
        let c = classify_pairs(&m, 2.5);
        for i in 0..m.num_elements() {
            for j in 0..m.num_elements() {
                let d = (m.centroid(i) - m.centroid(j)).norm();
                let reach = 2.5 * m.diameter(i).max(m.diameter(j));
                match c.get(i, j) {
                    PairClass::RegularNear => assert!(d < reach),
                    PairClass::RegularFar => assert!(d >= reach),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn deterministic_and_permutation_stable() {
        let m = make_icosphere(1, 1.0).unwrap();
        let a = classify_pairs(&m, 2.5);
        assert_eq!(a, classify_pairs(&m, 2.5));
        let perm: Vec<usize> = (0..m.num_elements()).rev().collect();
        let p = m.permuted(&perm).unwrap();
        let b = classify_pairs(&p, 2.5);
        for i in 0..perm.len() {
            for j in 0..perm.len() {
                assert_eq!(b.get(i, j), a.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn quadrant_elements_touch_their_mirror_images() {
        let m = make_revolution(&RevolutionSpec {
            start: (0.0, 0.0),
            segments: vec![
                ProfileSegment { end: (0.5, 0.0), divisions: 2, group: 0 },
                ProfileSegment { end: (0.5, 1.0), divisions: 3, group: 0 },
                ProfileSegment { end: (0.0, 1.0), divisions: 2, group: 1 },
            ],
            azimuth_divisions: 3,
            quadrant: true,
        })
        .unwrap();
        let c = classify_pairs_with_symmetry(&m, 2.5, Symmetry::QUADRANT_Z);
        assert_eq!(c.num_images(), 4);
        let mut edge_self_images = 0;
        for i in 0..m.num_elements() {
            for img in 1..4 {
                assert_ne!(c.get_image(img, i, i), PairClass::SelfPair);
                if c.get_image(img, i, i) == PairClass::SharedEdge {
                    edge_self_images += 1;
                }
            }
        }
        // every element with an edge on x = 0 or y = 0 meets its own mirror
        let on_plane = m
            .elements()
            .iter()
            .filter(|t| {
                let v: Vec<_> = t.iter().map(|&k| m.vertices()[k]).collect();
                let count = |f: &dyn Fn(&crate::geometry::Vec3<f64>) -> bool| v.iter().filter(|p| f(p)).count();
                count(&|p| p.x == 0.0) >= 2 || count(&|p| p.y == 0.0) >= 2
            })
            .count();
        assert_eq!(edge_self_images, on_plane);
    }
}
