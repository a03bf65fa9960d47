//! The conical radiator used by the optimization demo.
//!
//! A closed cylindrical cabinet whose front face is recessed into a conical
//! horn. The flat disk at the bottom of the horn (group 1) vibrates with a
//! uniform normal velocity; everything else is rigid. Only the quadrant
//! `x ≥ 0, y ≥ 0` is meshed, with symmetry planes x = 0 and y = 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bem::{Formulation, Medium, WaveConfig};
use crate::geometry::Vec3;
use crate::mesh::{make_revolution, Mesh, MeshError, ProfileSegment, RevolutionSpec, ShapeBasis, Symmetry};

/// Physical group of the vibrating throat disk.
pub const THROAT_GROUP: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeRadiator {
    pub cabinet_radius: f64,
    pub cabinet_depth: f64,
    pub mouth_radius: f64,
    pub throat_radius: f64,
    pub horn_depth: f64,
    /// Profile divisions: back disk, side wall, lip, horn wall, throat disk.
    pub divisions: [usize; 5],
    pub azimuth_divisions: usize,
    pub throat_velocity: f64,
    pub n_sectors: usize,
    pub n_knots: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Default for ConeRadiator {
    fn default() -> Self {
        Self {
            cabinet_radius: 0.1,
            cabinet_depth: 0.15,
            mouth_radius: 0.085,
            throat_radius: 0.02,
            horn_depth: 0.08,
            divisions: [4, 6, 1, 6, 2],
            azimuth_divisions: 8,
            throat_velocity: 1.0,
            n_sectors: 2,
            n_knots: 3,
            lower: -0.015,
            upper: 0.03,
        }
    }
}

impl ConeRadiator {
    /// A coarse variant (about 80 elements) for gradient checks.
    pub fn coarse() -> Self {
        Self { divisions: [2, 3, 1, 4, 1], azimuth_divisions: 4, n_sectors: 2, n_knots: 2, ..Self::default() }
    }

    pub fn mesh(&self) -> Result<Mesh, MeshError> {
        let (r, l) = (self.cabinet_radius, self.cabinet_depth);
        if !(0.0 < self.throat_radius && self.throat_radius < self.mouth_radius && self.mouth_radius < r) {
            return Err(MeshError::InvalidGeometry("need 0 < throat radius < mouth radius < cabinet radius".into()));
        }
        if !(0.0 < self.horn_depth && self.horn_depth < l) {
            return Err(MeshError::InvalidGeometry("horn depth must lie inside the cabinet".into()));
        }
        let d = self.divisions;
        let seg = |end, divisions, group| ProfileSegment { end, divisions, group };
        make_revolution(&RevolutionSpec {
            start: (0.0, 0.0),
            segments: vec![
                seg((r, 0.0), d[0], 0),
                seg((r, l), d[1], 0),
                seg((self.mouth_radius, l), d[2], 0),
                seg((self.throat_radius, l - self.horn_depth), d[3], 0),
                seg((0.0, l - self.horn_depth), d[4], THROAT_GROUP),
            ],
            azimuth_divisions: self.azimuth_divisions,
            quadrant: true,
        })
    }

    /// Radial offsets on `n_knots` knots spanning the horn, blended over
    /// `n_sectors` azimuthal sectors (0° = horizontal, 90° = vertical).
    pub fn basis(&self) -> ShapeBasis {
        ShapeBasis {
            n_sectors: self.n_sectors,
            taper_radius: self.throat_radius,
            lower: self.lower,
            upper: self.upper,
            ..ShapeBasis::axisymmetric(self.cabinet_depth - self.horn_depth, self.cabinet_depth, self.n_knots)
        }
    }

    pub fn velocity(&self, mesh: &Mesh) -> Vec<Complex64> {
        mesh.groups()
            .iter()
            .map(|&g| Complex64::new(if g == THROAT_GROUP { self.throat_velocity } else { 0.0 }, 0.0))
            .collect()
    }

    /// Burton–Miller radiation template (the wavenumber is overwritten per
    /// frequency).
    pub fn wave_template(&self, mesh: &Mesh) -> WaveConfig {
        WaveConfig::radiation(1.0, Formulation::BurtonMiller, self.velocity(mesh), Medium::default())
            .with_symmetry(Symmetry::QUADRANT_Z)
    }

    /// A point well inside the body, for CHIEF configurations.
    pub fn interior_point(&self) -> Vec3<f64> {
        Vec3::c(0.3 * self.cabinet_radius, 0.3 * self.cabinet_radius, 0.3 * (self.cabinet_depth - self.horn_depth))
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}
