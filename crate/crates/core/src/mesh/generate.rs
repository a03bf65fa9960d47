//! Procedural meshes: subdivided icosahedra/octahedra and surfaces of
//! revolution (the radiator bodies used by the optimization demos).

use std::collections::HashMap;

use super::{Mesh, MeshError};
use crate::geometry::Vec3;

/// Largest accepted subdivision level for the sphere generators.
pub const MAX_SUBDIVISIONS: u32 = 7;

fn subdivide_projected(
    mut vertices: Vec<Vec3<f64>>,
    mut faces: Vec<[usize; 3]>,
    levels: u32,
    radius: f64,
) -> Result<Mesh, MeshError> {
    if levels > MAX_SUBDIVISIONS {
        return Err(MeshError::InvalidGeometry(format!(
            "subdivision level {levels} exceeds {MAX_SUBDIVISIONS}"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MeshError::InvalidGeometry(format!("radius must be positive, got {radius}")));
    }
    for v in vertices.iter_mut() {
        *v = v.normalized();
    }
    for _ in 0..levels {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3<f64>>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalized());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v.normalized() * radius).collect();
    Mesh::new(vertices, faces)
}

/// Geodesic sphere: the icosahedron refined `subdivisions` times
/// (20·4^s elements), vertices projected onto the sphere.
pub fn make_icosphere(subdivisions: u32, radius: f64) -> Result<Mesh, MeshError> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let vertices = vec![
        Vec3::c(-1.0, t, 0.0),
        Vec3::c(1.0, t, 0.0),
        Vec3::c(-1.0, -t, 0.0),
        Vec3::c(1.0, -t, 0.0),
        Vec3::c(0.0, -1.0, t),
        Vec3::c(0.0, 1.0, t),
        Vec3::c(0.0, -1.0, -t),
        Vec3::c(0.0, 1.0, -t),
        Vec3::c(t, 0.0, -1.0),
        Vec3::c(t, 0.0, 1.0),
        Vec3::c(-t, 0.0, -1.0),
        Vec3::c(-t, 0.0, 1.0),
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    subdivide_projected(vertices, faces, subdivisions, radius)
}

/// Octahedral sphere (8·4^s elements: 8, 32, 128, 512, 2048, 8192, ...).
pub fn make_octasphere(subdivisions: u32, radius: f64) -> Result<Mesh, MeshError> {
    let vertices = vec![
        Vec3::c(1.0, 0.0, 0.0),
        Vec3::c(-1.0, 0.0, 0.0),
        Vec3::c(0.0, 1.0, 0.0),
        Vec3::c(0.0, -1.0, 0.0),
        Vec3::c(0.0, 0.0, 1.0),
        Vec3::c(0.0, 0.0, -1.0),
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    subdivide_projected(vertices, faces, subdivisions, radius)
}

/// One straight piece of a generatrix in the (r, z) half-plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSegment {
    pub end: (f64, f64),
    pub divisions: usize,
    pub group: u32,
}

/// A closed body of revolution about the z axis.
///
/// The generatrix starts at `start` (normally on the axis, r = 0) and
/// visits each segment end in turn; it should finish on the axis as well.
/// With `quadrant` set only 0 ≤ φ ≤ 90° is meshed, for use with the x = 0
/// and y = 0 symmetry planes.
#[derive(Clone, Debug, PartialEq)]
pub struct RevolutionSpec {
    pub start: (f64, f64),
    pub segments: Vec<ProfileSegment>,
    pub azimuth_divisions: usize,
    pub quadrant: bool,
}

pub fn make_revolution(spec: &RevolutionSpec) -> Result<Mesh, MeshError> {
    let nphi = spec.azimuth_divisions;
    if nphi < 1 || (!spec.quadrant && nphi < 3) {
        return Err(MeshError::InvalidGeometry("too few azimuthal divisions".into()));
    }
    // profile nodes with the group of the segment that follows each node
    let mut nodes = vec![spec.start];
    let mut seg_groups = Vec::new();
    let mut prev = spec.start;
    for seg in &spec.segments {
        if seg.divisions == 0 {
            return Err(MeshError::InvalidGeometry("segment with zero divisions".into()));
        }
        for d in 1..=seg.divisions {
            let t = d as f64 / seg.divisions as f64;
            let r = prev.0 + t * (seg.end.0 - prev.0);
            let z = prev.1 + t * (seg.end.1 - prev.1);
            nodes.push((if d == seg.divisions { seg.end.0 } else { r }, z));
            seg_groups.push(seg.group);
        }
        prev = seg.end;
    }
    if nodes.iter().any(|&(r, z)| r < 0.0 || !r.is_finite() || !z.is_finite()) {
        return Err(MeshError::InvalidGeometry("profile radius must be finite and ≥ 0".into()));
    }

    let span = if spec.quadrant { std::f64::consts::FRAC_PI_2 } else { std::f64::consts::TAU };
    let ring_len = if spec.quadrant { nphi + 1 } else { nphi };
    let mut vertices = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(nodes.len());
    for &(r, z) in &nodes {
        if r == 0.0 {
            vertices.push(Vec3::c(0.0, 0.0, z));
            rings.push(vec![vertices.len() - 1; ring_len]);
        } else {
            let mut ring = Vec::with_capacity(ring_len);
            for j in 0..ring_len {
                let phi = span * j as f64 / nphi as f64;
                // exact zeros on the symmetry planes
                let (s, c) = match (spec.quadrant, j) {
                    (true, 0) => (0.0, 1.0),
                    (true, j) if j == nphi => (1.0, 0.0),
                    _ => phi.sin_cos(),
                };
                vertices.push(Vec3::c(r * c, r * s, z));
                ring.push(vertices.len() - 1);
            }
            rings.push(ring);
        }
    }

    let mut elements = Vec::new();
    let mut groups = Vec::new();
    for i in 0..nodes.len() - 1 {
        let (lo, hi) = (&rings[i], &rings[i + 1]);
        let lo_axis = nodes[i].0 == 0.0;
        let hi_axis = nodes[i + 1].0 == 0.0;
        if lo_axis && hi_axis {
            return Err(MeshError::InvalidGeometry("profile runs along the axis".into()));
        }
        for j in 0..nphi {
            let jn = if spec.quadrant { j + 1 } else { (j + 1) % nphi };
            let (a, b, c, d) = (lo[j], lo[jn], hi[jn], hi[j]);
            if !lo_axis {
                elements.push([a, b, c]);
                groups.push(seg_groups[i]);
            }
            if !hi_axis {
                elements.push([a, c, d]);
                groups.push(seg_groups[i]);
            }
        }
    }
    Mesh::with_groups(vertices, elements, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_counts() {
        let m = make_icosphere(0, 1.0).unwrap();
        assert_eq!((m.num_vertices(), m.num_elements()), (12, 20));
        assert!(m.is_watertight());
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn icosphere_level_three() {
        assert_eq!(make_icosphere(3, 1.0).unwrap().num_elements(), 1280);
    }

    #[test]
    fn icosphere_vertices_on_sphere() {
        let m = make_icosphere(2, 0.5).unwrap();
        for v in m.vertices() {
            assert!((v.norm() - 0.5).abs() <= 0.5e-12);
        }
        // outward: normal points away from the origin
        for e in 0..m.num_elements() {
            assert!(m.normal(e).dot(m.centroid(e)) > 0.0);
        }
    }

    #[test]
    fn subdivision_guard() {
        assert!(make_icosphere(8, 1.0).is_err());
    }

    #[test]
    fn octasphere_counts() {
        let m = make_octasphere(2, 1.0).unwrap();
        assert_eq!(m.num_elements(), 128);
        assert!(m.is_watertight());
        assert!(m.signed_volume() > 0.0);
    }

    fn cylinder(quadrant: bool) -> Mesh {
        make_revolution(&RevolutionSpec {
            start: (0.0, 0.0),
            segments: vec![
                ProfileSegment { end: (0.5, 0.0), divisions: 2, group: 0 },
                ProfileSegment { end: (0.5, 1.0), divisions: 4, group: 0 },
                ProfileSegment { end: (0.0, 1.0), divisions: 2, group: 1 },
            ],
            azimuth_divisions: if quadrant { 4 } else { 16 },
            quadrant,
        })
        .unwrap()
    }

    #[test]
    fn full_revolution_is_closed_and_outward() {
        let m = cylinder(false);
        assert!(m.is_watertight());
        let exact = std::f64::consts::PI * 0.25;
        let v = m.signed_volume();
        assert!(v > 0.9 * exact && v < exact, "volume {v}");
        for e in 0..m.num_elements() {
            let c = m.centroid(e);
            let radial = Vec3::c(c.x, c.y, c.z - 0.5);
            assert!(m.normal(e).dot(radial) > 0.0, "element {e} points inward");
        }
        assert!(m.groups().iter().any(|&g| g == 1));
    }

    #[test]
    fn quadrant_rim_lies_on_symmetry_planes() {
        let m = cylinder(true);
        for (a, b) in m.boundary_edges() {
            let (va, vb) = (m.vertices()[a], m.vertices()[b]);
            assert!((va.x == 0.0 && vb.x == 0.0) || (va.y == 0.0 && vb.y == 0.0));
        }
    }
}
