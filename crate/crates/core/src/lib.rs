//! Differentiable boundary element method for the exterior Helmholtz
//! problem in 3D.
//!
//! Flat triangles with piecewise-constant densities and centroid
//! collocation; rigid scattering and Neumann radiation; conventional,
//! Burton–Miller and CHIEF formulations. Shape gradients of field losses
//! come from an adjoint solve plus dual-number re-assembly, and drive an
//! L-BFGS shape optimizer. [`analytic`] holds the independent Mie-series
//! and pulsating-sphere oracles.
//!
//! Geometry and kernels are generic over [`scalar::Real`] (`f64`, `f32`
//! and the forward-mode [`scalar::Dual64`]); the aliases below fix the
//! common choices.

pub mod analytic;
pub mod bem;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod optimize;
pub mod scalar;
pub mod shape_diff;
pub mod solver;

use thiserror::Error;

pub use num_complex::Complex64;

pub type Vec3d = geometry::Vec3<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
/// A mesh whose coordinates carry one tangent direction.
pub type DualMesh = mesh::Mesh<scalar::Dual64>;
pub type Dual = scalar::Dual64;

/// Any error the library can return.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Bem(#[from] bem::BemError),
    #[error(transparent)]
    Solve(#[from] solver::SolveError),
    #[error(transparent)]
    Grad(#[from] shape_diff::GradError),
    #[error(transparent)]
    Loss(#[from] optimize::LossError),
    #[error(transparent)]
    Optim(#[from] optimize::OptimError),
    #[error(transparent)]
    Mie(#[from] analytic::MieError),
}

impl From<optimize::OptimFailure> for Error {
    fn from(f: optimize::OptimFailure) -> Self {
        Error::Optim(f.error)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
