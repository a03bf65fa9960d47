//! Adjoint shape gradients.
//!
//! A real loss `L(p)` of complex domain pressures is carried by its
//! conjugate cotangent `c = ∂L/∂Re p + i ∂L/∂Im p`, so that
//! `dL = Re⟨c, dp⟩` with `⟨a, b⟩ = Σ conj(a_i) b_i`. With `p = P x + c₀`
//! and `A x = b`, a shape direction `s_j` gives
//!
//! `dL/ds_j = Re⟨λ, δb_j − δA_j x⟩ + Re⟨c, δP_j x + δc₀_j⟩`,  `Aᴴ λ = Pᴴ c`.
//!
//! The second term is the explicit dependence of the potential operator on
//! the geometry. For least-squares systems (`AᴴA x = Aᴴ b`, `r = b − A x`)
//! the first term becomes `Re⟨δA_j λ, r⟩ + Re⟨A λ, δb_j − δA_j x⟩` with
//! `AᴴA λ = Pᴴ c`.
//!
//! Every `δ` quantity is obtained by re-evaluating the generic assembly and
//! potential rows with dual numbers seeded along `∂V/∂s_j`, contracted row
//! by row so `∂A/∂s_j` is never stored.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use thiserror::Error;

use crate::bem::{Assembler, BemError, OperatorMatrix, PotentialEvaluator, WaveConfig};
use crate::geometry::Vec3;
use crate::linalg::{norm2, CMatrix};
use crate::mesh::{deform_with, AdjacencyClass, DeformMap, Mesh, MeshError};
use crate::scalar::{ceps, clift, Dual64};
use crate::solver::{adjoint_solve, SolveConfig, SolveError};

#[derive(Debug, Error)]
pub enum GradError {
    #[error(transparent)]
    Bem(#[from] BemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("dual-number geometry: {0}")]
    Mesh(#[from] MeshError),
    #[error("objective is not finite at stencil point {index} (parameter {param})")]
    NonFiniteObjective { param: usize, index: usize },
    #[error("finite-difference step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientDiagnostics {
    /// Largest relative residual of the adjoint solves.
    pub adjoint_residual: f64,
    pub adjoint_iterations: usize,
    /// `‖(Re⟨λ, δb_j − δA_j x⟩)_j‖₂`: the contribution through the solve.
    pub solve_term_norm: f64,
    /// `‖(Re⟨c, δP_j x + δc₀_j⟩)_j‖₂`: the explicit potential term.
    pub explicit_term_norm: f64,
    /// `‖Pᴴ c‖₂` summed over frequencies.
    pub g_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientResult {
    pub grad: Vec<f64>,
    pub diagnostics: GradientDiagnostics,
}

/// `g = Pᴴ c`, the cotangent of the boundary solution.
pub fn pullback_potential(potential: &CMatrix, cot: &[Complex64]) -> Result<Vec<Complex64>, GradError> {
    if cot.len() != potential.rows() {
        return Err(GradError::Dimension { expected: potential.rows(), got: cot.len() });
    }
    Ok(potential.matvec_adjoint(cot))
}

/// Explicit term `Re⟨c, δP_j x + δc₀_j⟩` for one dual-seeded geometry.
pub fn explicit_potential_term(
    mesh: &Mesh<Dual64>,
    cfg: &WaveConfig,
    x: &[Complex64],
    points: &[Vec3<f64>],
    cot: &[Complex64],
) -> Result<f64, GradError> {
    let ev = PotentialEvaluator::new(mesh, cfg)?;
    let mut buf = Vec::new();
    let mut acc = 0.0;
    for (z, c) in points.iter().zip(cot) {
        if c.norm() == 0.0 {
            continue;
        }
        let dp = ceps(ev.eval(Vec3::lift(*z), x, &mut buf));
        acc += (c.conj() * dp).re;
    }
    Ok(acc)
}

/// What the backward pass needs from one forward solve.
pub struct ForwardState<'a> {
    pub base: &'a Mesh<f64>,
    pub map: &'a DeformMap,
    pub values: &'a [f64],
    pub classes: &'a AdjacencyClass,
    pub cfg: &'a WaveConfig,
    pub op: &'a OperatorMatrix,
    pub x: &'a [Complex64],
    pub points: &'a [Vec3<f64>],
    /// Potential operator at `points` on the deformed mesh.
    pub potential: &'a CMatrix,
}

/// Per-parameter split of one frequency's gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGradient {
    pub solve_term: Vec<f64>,
    pub explicit_term: Vec<f64>,
    pub adjoint_residual: f64,
    pub adjoint_iterations: usize,
    pub g_norm: f64,
}

impl FrequencyGradient {
    pub fn total(&self, include_explicit: bool) -> Vec<f64> {
        self.solve_term
            .iter()
            .zip(&self.explicit_term)
            .map(|(a, b)| if include_explicit { a + b } else { *a })
            .collect()
    }
}

fn seeded(values: &[f64], j: usize) -> Vec<Dual64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == j { Dual64::variable(v) } else { Dual64::constant(v) })
        .collect()
}

/// Adjoint solve plus per-parameter dual re-assembly for one frequency.
pub fn backward(state: &ForwardState<'_>, cot: &[Complex64], solve_cfg: &SolveConfig) -> Result<FrequencyGradient, GradError> {
    let n = state.op.num_elements();
    if state.x.len() != n {
        return Err(GradError::Dimension { expected: n, got: state.x.len() });
    }
    let g = pullback_potential(state.potential, cot)?;
    let g_norm = norm2(&g);
    let p = state.values.len();
    let zero = Complex64::new(0.0, 0.0);
    if g_norm == 0.0 && cot.iter().all(|c| c.norm() == 0.0) {
        return Ok(FrequencyGradient {
            solve_term: vec![0.0; p],
            explicit_term: vec![0.0; p],
            adjoint_residual: 0.0,
            adjoint_iterations: 0,
            g_norm,
        });
    }
    let adj = adjoint_solve(&state.op.entries, &g, &solve_cfg.with_warm_start(None))?;
    let lambda = adj.x;
    let ls = state.op.is_least_squares();
    // weights pairing with the residual rows, and (LS only) the primal residual
    let (weights, residual) = if ls {
        let a_lambda = state.op.entries.matvec(&lambda);
        let ax = state.op.entries.matvec(state.x);
        let r: Vec<_> = state.op.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        (a_lambda, r)
    } else {
        (lambda.clone(), vec![zero; 0])
    };

    let per_param: Vec<Result<(f64, f64), GradError>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let vals = seeded(state.values, j);
            let mesh = deform_with(state.base, state.map, &vals)?;
            let asm = Assembler::new(&mesh, state.cfg, state.classes)?;
            let mut buf: Vec<Complex<Dual64>> = Vec::new();
            let mut solve_term = 0.0;
            for r in 0..asm.num_rows() {
                let res = asm.residual_row(r, state.x, &mut buf);
                // δ(Ax − b)_r
                solve_term -= (weights[r].conj() * ceps(res)).re;
                if ls {
                    let mut d_a_lambda = Complex64::new(0.0, 0.0);
                    for (a, l) in buf.iter().zip(&lambda) {
                        d_a_lambda += ceps(*a * clift::<Dual64>(*l));
                    }
                    solve_term += (d_a_lambda.conj() * residual[r]).re;
                }
            }
            let explicit = explicit_potential_term(&mesh, state.cfg, state.x, state.points, cot)?;
            Ok((solve_term, explicit))
        })
        .collect();
    let mut solve_term = Vec::with_capacity(p);
    let mut explicit_term = Vec::with_capacity(p);
    for r in per_param {
        let (a, b) = r?;
        solve_term.push(a);
        explicit_term.push(b);
    }
    Ok(FrequencyGradient {
        solve_term,
        explicit_term,
        adjoint_residual: adj.residual_norm,
        adjoint_iterations: adj.iterations,
        g_norm,
    })
}

/// Central differences `(f(s + h e_j) − f(s − h e_j)) / 2h`.
pub fn fd_gradient<F, E>(objective: F, params: &[f64], h: f64) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
    E: From<GradError>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(GradError::BadStep(h).into());
    }
    let mut out = Vec::with_capacity(params.len());
    let mut s = params.to_vec();
    for j in 0..params.len() {
        s[j] = params[j] + h;
        let fp = objective(&s)?;
        s[j] = params[j] - h;
        let fm = objective(&s)?;
        s[j] = params[j];
        if !fp.is_finite() {
            return Err(GradError::NonFiniteObjective { param: j, index: 0 }.into());
        }
        if !fm.is_finite() {
            return Err(GradError::NonFiniteObjective { param: j, index: 1 }.into());
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}
