//! Boundary element operators for the exterior Helmholtz problem with
//! constant elements and centroid collocation.

pub mod assembly;
pub mod conventions;
pub mod fieldio;
pub mod incident;
pub mod integrate;
pub mod kernels;
pub mod potential;
pub mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::mesh::{MeshError, Symmetry};

pub use assembly::{assemble, Assembler, OperatorMatrix};
pub use fieldio::{read_points_csv, write_field_csv, write_vtk_structured_points, GridSpec};
pub use incident::{incident_plane_wave, PlaneWave};
pub use kernels::{greens, greens_dn, greens_dndn, greens_dnx, greens_grad_x};
pub use potential::{evaluate_potential, potential_matrix, PotentialEvaluator};
pub use quadrature::{QuadratureRule, RuleKind, RuleSet};

#[derive(Debug, Error)]
pub enum BemError {
    #[error("field point coincides with source point")]
    CoincidentPoints,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite operator entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Conventional,
    BurtonMiller,
    /// Conventional rows plus interior CHIEF rows, solved in least squares.
    Chief,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    /// Sound speed (m/s).
    pub c: f64,
    /// Density (kg/m³).
    pub rho: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Self { c: 343.0, rho: 1.21 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// Sound-hard body in an incident plane wave; unknown = total pressure.
    RigidScattering(PlaneWave),
    /// Prescribed normal velocity (m/s) per element; unknown = radiated pressure.
    NeumannRadiation { velocity: Vec<Complex64> },
}

/// Rule used for well-separated pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarRule {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureOptions {
    pub polar_order: usize,
    pub far_rule: FarRule,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { polar_order: quadrature::DEFAULT_POLAR_ORDER, far_rule: FarRule::Low }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveConfig {
    /// Wavenumber (rad/m).
    pub k: f64,
    pub formulation: Formulation,
    /// Burton–Miller coupling; `None` means `i/k`.
    pub coupling: Option<Complex64>,
    pub chief_points: Vec<Vec3<f64>>,
    pub bc: BoundaryCondition,
    pub medium: Medium,
    pub symmetry: Symmetry,
    pub quadrature: QuadratureOptions,
}

impl WaveConfig {
    pub fn rigid(k: f64, formulation: Formulation, wave: PlaneWave) -> Self {
        Self {
            k,
            formulation,
            coupling: None,
            chief_points: Vec::new(),
            bc: BoundaryCondition::RigidScattering(wave),
            medium: Medium::default(),
            symmetry: Symmetry::NONE,
            quadrature: QuadratureOptions::default(),
        }
    }

    pub fn radiation(k: f64, formulation: Formulation, velocity: Vec<Complex64>, medium: Medium) -> Self {
        Self {
            k,
            formulation,
            coupling: None,
            chief_points: Vec::new(),
            bc: BoundaryCondition::NeumannRadiation { velocity },
            medium,
            symmetry: Symmetry::NONE,
            quadrature: QuadratureOptions::default(),
        }
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn with_chief_points(mut self, points: Vec<Vec3<f64>>) -> Self {
        self.chief_points = points;
        self
    }

    pub fn with_k(&self, k: f64) -> Self {
        let mut c = self.clone();
        c.k = k;
        c
    }

    /// Effective coupling: zero unless Burton–Miller.
    pub fn eta(&self) -> Complex64 {
        match self.formulation {
            Formulation::BurtonMiller => self.coupling.unwrap_or_else(|| conventions::default_coupling(self.k)),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Angular frequency `ω = k c`.
    pub fn omega(&self) -> f64 {
        self.k * self.medium.c
    }

    /// Neumann data `q = ∂p/∂n` per element (zero for rigid scattering).
    pub fn neumann_data(&self) -> Option<Vec<Complex64>> {
        match &self.bc {
            BoundaryCondition::RigidScattering(_) => None,
            BoundaryCondition::NeumannRadiation { velocity } => Some(
                velocity
                    .iter()
                    .map(|&v| conventions::neumann_from_velocity(v, self.k, self.medium.c, self.medium.rho))
                    .collect(),
            ),
        }
    }

    pub fn validate(&self, n_elements: usize) -> Result<(), BemError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(BemError::InvalidConfig(format!("wavenumber must be positive, got {}", self.k)));
        }
        if !(self.medium.c > 0.0 && self.medium.rho > 0.0) {
            return Err(BemError::InvalidConfig("medium sound speed and density must be positive".into()));
        }
        if self.quadrature.polar_order < 2 {
            return Err(BemError::InvalidConfig("polar quadrature order must be at least 2".into()));
        }
        match &self.bc {
            BoundaryCondition::RigidScattering(w) => w.validate()?,
            BoundaryCondition::NeumannRadiation { velocity } => {
                if velocity.len() != n_elements {
                    return Err(BemError::Dimension { expected: n_elements, got: velocity.len() });
                }
            }
        }
        if self.formulation == Formulation::Chief && self.chief_points.is_empty() {
            return Err(BemError::InvalidConfig("CHIEF formulation needs at least one interior point".into()));
        }
        Ok(())
    }
}
