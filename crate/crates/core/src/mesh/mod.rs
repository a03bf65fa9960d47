//! Flat-triangle surface meshes.
//!
//! A [`Mesh`] owns its vertices and counter-clockwise vertex-index triples
//! and caches per-element normal, area, centroid and diameter. It is generic
//! over the scalar so that a deformed mesh can carry dual-number coordinates.

mod adjacency;
mod deform;
mod generate;
mod io;
mod symmetry;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::Vec3;
use crate::scalar::Real;

pub use adjacency::{classify_pairs, classify_pairs_with_symmetry, AdjacencyClass, PairClass};
pub use deform::{deform, deform_with, DeformMap, spline_basis, ShapeBasis, ShapeParams, SplineBasis};
pub use generate::{make_icosphere, make_octasphere, make_revolution, ProfileSegment, RevolutionSpec};
pub use io::{load_mesh, read_msh, read_obj, write_obj, MeshFormat};
pub use symmetry::{Reflection, Symmetry};

/// Smallest admissible element area (m²).
pub const MIN_AREA: f64 = 1e-12;

/// Default near-field factor: centroid distance relative to the larger
/// element diameter below which a pair is integrated with the high rule.
pub const DEFAULT_NEAR_FACTOR: f64 = 2.5;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("element {element} is not a triangle ({count} vertices)")]
    NonTriangle { element: usize, count: usize },
    #[error("element {element} references vertex {vertex}, but only {count} vertices exist")]
    IndexOutOfRange { element: usize, vertex: usize, count: usize },
    #[error("element {element} repeats a vertex index")]
    RepeatedVertex { element: usize },
    #[error("element {element} is degenerate (area {area:e} m²)")]
    Degenerate { element: usize, area: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid shape parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct Mesh<T = f64> {
    vertices: Vec<Vec3<T>>,
    elements: Vec<[usize; 3]>,
    groups: Vec<u32>,
    normals: Vec<Vec3<T>>,
    areas: Vec<T>,
    centroids: Vec<Vec3<T>>,
    diameters: Vec<T>,
}

impl<T: Real> Mesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, elements: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let groups = vec![0; elements.len()];
        Self::with_groups(vertices, elements, groups)
    }

    /// Build a mesh with an integer tag per element (physical group).
    pub fn with_groups(
        vertices: Vec<Vec3<T>>,
        elements: Vec<[usize; 3]>,
        groups: Vec<u32>,
    ) -> Result<Self, MeshError> {
        if groups.len() != elements.len() {
            return Err(MeshError::InvalidGeometry(format!(
                "{} group tags for {} elements",
                groups.len(),
                elements.len()
            )));
        }
        let n = vertices.len();
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(MeshError::IndexOutOfRange { element: e, vertex: v, count: n });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { element: e });
            }
        }
        let mut mesh = Self {
            vertices,
            elements,
            groups,
            normals: Vec::new(),
            areas: Vec::new(),
            centroids: Vec::new(),
            diameters: Vec::new(),
        };
        mesh.update_geometry()?;
        Ok(mesh)
    }

    fn update_geometry(&mut self) -> Result<(), MeshError> {
        let m = self.elements.len();
        self.normals.clear();
        self.areas.clear();
        self.centroids.clear();
        self.diameters.clear();
        self.normals.reserve(m);
        self.areas.reserve(m);
        self.centroids.reserve(m);
        self.diameters.reserve(m);
        let third = T::lift(1.0 / 3.0);
        for e in 0..m {
            let [a, b, c] = self.element_vertices(e);
            let cr = (b - a).cross(c - a);
            let twice = cr.norm();
            let area = twice * T::lift(0.5);
            if !(area.value() >= MIN_AREA) {
                return Err(MeshError::Degenerate { element: e, area: area.value() });
            }
            self.normals.push(cr.scale(twice.recip()));
            self.areas.push(area);
            self.centroids.push((a + b + c).scale(third));
            let d = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            self.diameters.push(d);
        }
        Ok(())
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }
    #[inline]
    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }
    #[inline]
    pub fn groups(&self) -> &[u32] {
        &self.groups
    }
    #[inline]
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }
    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    #[inline]
    pub fn normal(&self, e: usize) -> Vec3<T> {
        self.normals[e]
    }
    #[inline]
    pub fn area(&self, e: usize) -> T {
        self.areas[e]
    }
    #[inline]
    pub fn centroid(&self, e: usize) -> Vec3<T> {
        self.centroids[e]
    }
    /// Longest edge of element `e`.
    #[inline]
    pub fn diameter(&self, e: usize) -> T {
        self.diameters[e]
    }
    pub fn normals(&self) -> &[Vec3<T>] {
        &self.normals
    }
    pub fn areas(&self) -> &[T] {
        &self.areas
    }
    pub fn centroids(&self) -> &[Vec3<T>] {
        &self.centroids
    }
    pub fn diameters(&self) -> &[T] {
        &self.diameters
    }

    #[inline]
    pub fn element_vertices(&self, e: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.elements[e];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed enclosed volume by the divergence theorem; positive for a
    /// closed mesh with outward normals.
    pub fn signed_volume(&self) -> T {
        let sixth = T::lift(1.0 / 6.0);
        (0..self.num_elements())
            .map(|e| {
                let [a, b, c] = self.element_vertices(e);
                a.dot(b.cross(c)) * sixth
            })
            .sum()
    }

    pub fn total_area(&self) -> T {
        self.areas.iter().copied().sum()
    }

    /// Primal-valued copy.
    pub fn to_f64(&self) -> Mesh<f64> {
        Mesh {
            vertices: self.vertices.iter().map(|v| v.value()).collect(),
            elements: self.elements.clone(),
            groups: self.groups.clone(),
            normals: self.normals.iter().map(|v| v.value()).collect(),
            areas: self.areas.iter().map(|a| a.value()).collect(),
            centroids: self.centroids.iter().map(|v| v.value()).collect(),
            diameters: self.diameters.iter().map(|a| a.value()).collect(),
        }
    }

    /// Number of elements using each undirected edge.
    pub fn edge_use_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.elements {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge is shared by exactly two elements.
    pub fn is_watertight(&self) -> bool {
        self.edge_use_counts().values().all(|&c| c == 2)
    }

    /// Edges used by exactly one element (the rim of an open patch).
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .edge_use_counts()
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(e, _)| e)
            .collect();
        edges.sort_unstable();
        edges
    }
}

impl Mesh<f64> {
    /// Lift a plain mesh to another scalar type (derivatives zero).
    pub fn lift<T: Real>(&self) -> Mesh<T> {
        Mesh {
            vertices: self.vertices.iter().map(|&v| Vec3::lift(v)).collect(),
            elements: self.elements.clone(),
            groups: self.groups.clone(),
            normals: self.normals.iter().map(|&v| Vec3::lift(v)).collect(),
            areas: self.areas.iter().map(|&a| T::lift(a)).collect(),
            centroids: self.centroids.iter().map(|&v| Vec3::lift(v)).collect(),
            diameters: self.diameters.iter().map(|&a| T::lift(a)).collect(),
        }
    }

    /// Copy with the element order permuted: new element `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MeshError> {
        let elements = perm.iter().map(|&p| self.elements[p]).collect();
        let groups = perm.iter().map(|&p| self.groups[p]).collect();
        Self::with_groups(self.vertices.clone(), elements, groups)
    }

    /// Axis-aligned bounding box extent (largest side).
    pub fn extent(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
    }
}
