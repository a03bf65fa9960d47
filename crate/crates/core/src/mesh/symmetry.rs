//! Coordinate symmetry planes handled by image reflection.
//!
//! A mesh modelled with symmetry covers only one sector of the body; the
//! missing sectors are the images of the modelled elements under every
//! combination of the active reflections. The surface data is assumed to be
//! even (symmetric) across each plane.

use crate::geometry::Vec3;
use crate::scalar::Real;

use super::Mesh;

/// Reflection through any subset of the planes x = 0, y = 0, z = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Reflection {
    pub flip: [bool; 3],
}

impl Reflection {
    pub const IDENTITY: Self = Self { flip: [false; 3] };

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.flip == [false; 3]
    }

    /// An odd number of flips reverses orientation.
    #[inline]
    pub fn reverses_orientation(&self) -> bool {
        self.flip.iter().filter(|&&f| f).count() % 2 == 1
    }

    #[inline]
    pub fn apply<T: Real>(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            if self.flip[0] { -v.x } else { v.x },
            if self.flip[1] { -v.y } else { v.y },
            if self.flip[2] { -v.z } else { v.z },
        )
    }

    /// Image of a triangle with vertex order fixed up so that the image
    /// normal is the reflected outward normal.
    #[inline]
    pub fn apply_triangle<T: Real>(&self, tri: [Vec3<T>; 3]) -> [Vec3<T>; 3] {
        let [a, b, c] = tri.map(|v| self.apply(v));
        if self.reverses_orientation() {
            [a, c, b]
        } else {
            [a, b, c]
        }
    }

    /// Same permutation as [`Reflection::apply_triangle`] applied to indices.
    #[inline]
    pub fn order_indices(&self, tri: [usize; 3]) -> [usize; 3] {
        if self.reverses_orientation() {
            [tri[0], tri[2], tri[1]]
        } else {
            tri
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Symmetry {
    /// Active planes: `planes[0]` is x = 0, `[1]` is y = 0, `[2]` is z = 0.
    pub planes: [bool; 3],
}

impl Symmetry {
    pub const NONE: Self = Self { planes: [false; 3] };

    /// The x = 0 and y = 0 planes (a quadrant about the z axis).
    pub const QUADRANT_Z: Self = Self { planes: [true, true, false] };

    pub fn is_none(&self) -> bool {
        self.planes == [false; 3]
    }

    /// All reflections generated by the active planes, identity first.
    pub fn reflections(&self) -> Vec<Reflection> {
        let mut out = vec![Reflection::IDENTITY];
        for axis in 0..3 {
            if self.planes[axis] {
                let more: Vec<_> = out
                    .iter()
                    .map(|r| {
                        let mut f = r.flip;
                        f[axis] = true;
                        Reflection { flip: f }
                    })
                    .collect();
                out.extend(more);
            }
        }
        out
    }

    /// Per reflection, which vertices are mapped onto themselves.
    ///
    /// A vertex is fixed when it lies on every plane the reflection flips,
    /// within `1e-9` of the mesh extent. Computed once from the base mesh;
    /// deformations that displace radially about the symmetry axis keep these
    /// vertices on their planes.
    pub fn fixed_vertices(&self, mesh: &Mesh<f64>) -> Vec<Vec<bool>> {
        let tol = 1e-9 * mesh.extent().max(1e-300);
        self.reflections()
            .iter()
            .map(|r| {
                mesh.vertices()
                    .iter()
                    .map(|v| (0..3).all(|k| !r.flip[k] || v[k].abs() <= tol))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_has_four_images() {
        let r = Symmetry::QUADRANT_Z.reflections();
        assert_eq!(r.len(), 4);
        assert!(r[0].is_identity());
        assert_eq!(r.iter().filter(|x| x.reverses_orientation()).count(), 2);
    }

    #[test]
    fn image_triangle_keeps_outward_normal() {
        let tri = [Vec3::c(1.0, 0.0, 0.0), Vec3::c(1.0, 1.0, 0.0), Vec3::c(1.0, 0.0, 1.0)];
        let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        assert!(n.x > 0.0);
        let r = Reflection { flip: [true, false, false] };
        let img = r.apply_triangle(tri);
        let ni = (img[1] - img[0]).cross(img[2] - img[0]);
        assert!(ni.x < 0.0);
        assert_eq!(ni, r.apply(n));
    }
}
