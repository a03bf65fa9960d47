//! Restarted GMRES for dense complex systems and their adjoints.
//!
//! Least-squares systems (more rows than columns, from CHIEF) are solved
//! through the normal equations `AᴴA x = Aᴴb`; the operator is applied as
//! two matrix–vector products and never formed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bem::OperatorMatrix;
use crate::linalg::{axpy, dotc, norm2, CMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    None,
    /// Left scaling by the inverse diagonal.
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
    #[serde(skip)]
    pub warm_start: Option<Vec<Complex64>>,
    pub preconditioner: Preconditioner,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: 1e-8, restart: 200, max_iters: 2000, warm_start: None, preconditioner: Preconditioner::None }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(SolveError::InvalidConfig(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.restart < 1 {
            return Err(SolveError::InvalidConfig("restart length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_warm_start(&self, x0: Option<Vec<Complex64>>) -> Self {
        Self { warm_start: x0, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySolution {
    pub x: Vec<Complex64>,
    /// Final relative residual of the system actually iterated on.
    pub residual_norm: f64,
    /// Inner GMRES iterations (operator applications).
    pub iterations: usize,
    /// Whether the warm start contributed to the solution.
    pub warm_started: bool,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("GMRES did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64, best: Vec<Complex64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("zero diagonal entry {0} prevents Jacobi scaling")]
    ZeroDiagonal(usize),
}

/// Generic restarted GMRES on `op(x) = b` with optional left scaling.
pub fn gmres<F>(op: F, b: &[Complex64], scale: Option<&[Complex64]>, cfg: &SolveConfig) -> Result<BoundarySolution, SolveError>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    cfg.validate()?;
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(BoundarySolution { x: vec![zero; n], residual_norm: 0.0, iterations: 0, warm_started: false });
    }
    let precond = |v: &mut [Complex64]| {
        if let Some(s) = scale {
            for (vi, si) in v.iter_mut().zip(s) {
                *vi *= si;
            }
        }
    };
    let residual = |x: &[Complex64]| -> Vec<Complex64> {
        let ax = op(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };

    // A warm start x0 enters as one extra search direction: the first cycle
    // minimizes the residual over span{x0} + K(A, b), so it can only help.
    let mut aug = None;
    if let Some(x0) = &cfg.warm_start {
        if x0.len() != n {
            return Err(SolveError::Dimension { expected: n, got: x0.len() });
        }
        let mut w0 = op(x0);
        precond(&mut w0);
        if norm2(&w0) > 0.0 {
            aug = Some((x0.clone(), w0));
        }
    }
    let mut x = vec![zero; n];
    let mut warm_started = false;
    let mut r = b.to_vec();
    let mut mb = b.to_vec();
    precond(&mut mb);
    let mbnorm = norm2(&mb);

    let m = cfg.restart.min(n.max(1));
    let mut iters = 0;
    let mut best = (1.0, x.clone());
    loop {
        let rel = norm2(&r) / bnorm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= cfg.tol {
            return Ok(BoundarySolution { x, residual_norm: rel, iterations: iters, warm_started });
        }
        if iters >= cfg.max_iters {
            return Err(SolveError::NotConverged { iterations: iters, residual: best.0, best: best.1 });
        }
        let mut z = r.clone();
        precond(&mut z);
        let beta = norm2(&z);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(z.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        // augmentation: d = rotated coordinates of w0 in the basis, w_perp
        // its component outside the basis
        let cycle_aug = aug.take();
        let mut d = vec![zero; m + 1];
        let mut w_perp = Vec::new();
        if let Some((_, w0)) = &cycle_aug {
            w_perp = w0.clone();
            d[0] = dotc(&basis[0], &w_perp);
            axpy(-d[0], &basis[0], &mut w_perp);
        }
        let mut cols = 0;
        for j in 0..m {
            let mut w = op(&basis[j]);
            precond(&mut w);
            iters += 1;
            // modified Gram–Schmidt, two passes
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dotc(v, &w);
                    h[i][j] += hij;
                    axpy(-hij, v, &mut w);
                }
            }
            let wn = norm2(&w);
            let breakdown = wn <= 1e-14 * beta;
            let next: Vec<Complex64> = if breakdown { Vec::new() } else { w.iter().map(|v| v / wn).collect() };
            h[j + 1][j] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i].conj() * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = Complex64::new(1.0, 0.0);
            } else {
                cs[j] = a.norm() / denom;
                sn[j] = a / a.norm() * bb.conj() / denom;
            }
            h[j][j] = cs[j] * a + sn[j] * bb;
            h[j + 1][j] = zero;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            cols = j + 1;
            let mut est = g[j + 1].norm();
            if cycle_aug.is_some() {
                if !breakdown {
                    d[j + 1] = dotc(&next, &w_perp);
                    axpy(-d[j + 1], &next, &mut w_perp);
                }
                let t = cs[j] * d[j] + sn[j] * d[j + 1];
                d[j + 1] = -sn[j].conj() * d[j] + cs[j] * d[j + 1];
                d[j] = t;
                let rho = norm2(&w_perp);
                let q = (d[j + 1].norm_sqr() + rho * rho).sqrt();
                if q > 0.0 {
                    est *= rho / q;
                }
            }
            est /= mbnorm;
            log::trace!("gmres iter {iters}: estimated residual {est:.3e}");
            if est <= cfg.tol || breakdown || iters >= cfg.max_iters {
                break;
            }
            basis.push(next);
        }
        let mut alpha = zero;
        if let Some((x0, _)) = &cycle_aug {
            let rho2 = norm2(&w_perp).powi(2);
            let q = d[cols].norm_sqr() + rho2;
            if q > 0.0 {
                alpha = d[cols].conj() * g[cols] / q;
            }
            for i in 0..cols {
                g[i] -= alpha * d[i];
            }
            if alpha != zero {
                axpy(alpha, x0, &mut x);
                warm_started = true;
            }
        }
        // back substitution
        let mut y = vec![zero; cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for l in i + 1..cols {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }
        let prev = norm2(&r);
        r = residual(&x);
        let now = norm2(&r);
        if now >= prev * (1.0 - 1e-13) && now / bnorm > cfg.tol {
            // a full cycle without progress repeats forever
            return Err(SolveError::NotConverged { iterations: iters, residual: best.0.min(now / bnorm), best: best.1 });
        }
    }
}

fn jacobi_scale(diag: &[Complex64]) -> Result<Vec<Complex64>, SolveError> {
    diag.iter()
        .enumerate()
        .map(|(i, d)| if d.norm() == 0.0 { Err(SolveError::ZeroDiagonal(i)) } else { Ok(d.inv()) })
        .collect()
}

/// Solve `A x = b`, or the normal equations when `A` has more rows than
/// columns.
pub fn gmres_solve(a: &CMatrix, b: &[Complex64], cfg: &SolveConfig) -> Result<BoundarySolution, SolveError> {
    if b.len() != a.rows() {
        return Err(SolveError::Dimension { expected: a.rows(), got: b.len() });
    }
    if a.is_square() {
        let scale = match cfg.preconditioner {
            Preconditioner::None => None,
            Preconditioner::Jacobi => Some(jacobi_scale(&a.diagonal())?),
        };
        gmres(|v| a.matvec(v), b, scale.as_deref(), cfg)
    } else {
        let rhs = a.matvec_adjoint(b);
        normal_equations(a, &rhs, cfg)
    }
}

fn normal_equations(a: &CMatrix, rhs: &[Complex64], cfg: &SolveConfig) -> Result<BoundarySolution, SolveError> {
    let scale = match cfg.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => {
            let d: Vec<Complex64> = (0..a.cols())
                .map(|j| Complex64::new((0..a.rows()).map(|i| a.get(i, j).norm_sqr()).sum(), 0.0))
                .collect();
            Some(jacobi_scale(&d)?)
        }
    };
    gmres(|v| a.matvec_adjoint(&a.matvec(v)), rhs, scale.as_deref(), cfg)
}

/// Solve `Aᴴ λ = g` by conjugate-transpose application (for least-squares
/// systems, `(AᴴA) λ = g`, which is its own adjoint).
pub fn adjoint_solve(a: &CMatrix, g: &[Complex64], cfg: &SolveConfig) -> Result<BoundarySolution, SolveError> {
    if g.len() != a.cols() {
        return Err(SolveError::Dimension { expected: a.cols(), got: g.len() });
    }
    if a.is_square() {
        let scale = match cfg.preconditioner {
            Preconditioner::None => None,
            Preconditioner::Jacobi => Some(jacobi_scale(&a.diagonal().iter().map(|d| d.conj()).collect::<Vec<_>>())?),
        };
        gmres(|v| a.matvec_adjoint(v), g, scale.as_deref(), cfg)
    } else {
        normal_equations(a, g, cfg)
    }
}

/// Solve an assembled system with its own right-hand side.
pub fn solve_operator(op: &OperatorMatrix, cfg: &SolveConfig) -> Result<BoundarySolution, SolveError> {
    gmres_solve(&op.entries, &op.rhs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_in_one_iteration() {
        let a = CMatrix::identity(5);
        let b: Vec<_> = (0..5).map(|i| c(i as f64, 1.0)).collect();
        let s = gmres_solve(&a, &b, &SolveConfig::default()).unwrap();
        assert_eq!(s.iterations, 1);
        for (x, y) in s.x.iter().zip(&b) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_inverse() {
        let n = 30;
        let a = CMatrix::from_fn(n, n, |i, j| if i == j { c((i + 1) as f64, 0.0) } else { c(0.0, 0.0) });
        let s = gmres_solve(&a, &vec![c(1.0, 0.0); n], &SolveConfig::default()).unwrap();
        assert!(s.residual_norm <= 1e-8);
        for (i, x) in s.x.iter().enumerate() {
            assert!((x - c(1.0 / (i + 1) as f64, 0.0)).norm() < 1e-7);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CMatrix::identity(3);
        let s = gmres_solve(&a, &[c(0.0, 0.0); 3], &SolveConfig::default()).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(s.x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn warm_start_from_solution_needs_no_iterations() {
        let a = CMatrix::from_fn(10, 10, |i, j| if i == j { c(3.0, 0.5) } else { c(0.1 * (i as f64 - j as f64), 0.05) });
        let b: Vec<_> = (0..10).map(|i| c(1.0, i as f64)).collect();
        let cold = gmres_solve(&a, &b, &SolveConfig { tol: 1e-12, ..Default::default() }).unwrap();
        let warm = gmres_solve(&a, &b, &SolveConfig::default().with_warm_start(Some(cold.x.clone()))).unwrap();
        assert!(warm.iterations <= 1 && warm.warm_started);
    }

    #[test]
    fn warm_start_never_costs_iterations() {
        let n = 60;
        let entry = |i: usize, j: usize, s: f64| {
            let t = ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5;
            let u = ((i * 7 + j * 29) % 19) as f64 / 19.0 - 0.5;
            c(if i == j { 2.0 } else { 0.0 } + s * t / n as f64 * 6.0, s * u / n as f64 * 6.0)
        };
        let a = CMatrix::from_fn(n, n, |i, j| entry(i, j, 1.0));
        let b: Vec<_> = (0..n).map(|i| c((i as f64 * 0.3).sin(), (i as f64 * 0.2).cos())).collect();
        let cfg = SolveConfig { tol: 1e-10, ..Default::default() };
        let cold = gmres_solve(&a, &b, &cfg).unwrap();
        let nearby = CMatrix::from_fn(n, n, |i, j| entry(i, j, 1.1));
        let guesses = [
            gmres_solve(&nearby, &b, &cfg).unwrap().x,
            vec![c(-100.0, 3.0); n],
            (0..n).map(|i| c(((i * 37) % 11) as f64, 0.0)).collect(),
        ];
        for x0 in guesses {
            let warm = gmres_solve(&a, &b, &cfg.with_warm_start(Some(x0))).unwrap();
            assert!(warm.residual_norm <= 1e-10);
            assert!(warm.iterations <= cold.iterations, "{} > {}", warm.iterations, cold.iterations);
        }
        // a useless guess gets no weight
        let id = CMatrix::identity(4);
        let ones = vec![c(1.0, 0.0); 4];
        let orth = vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)];
        let s = gmres_solve(&id, &ones, &SolveConfig::default().with_warm_start(Some(orth))).unwrap();
        assert!(!s.warm_started);
    }

    #[test]
    fn non_convergence_reports_best_iterate() {
        let n = 40;
        let a = CMatrix::from_fn(n, n, |i, j| c(((i * 13 + j * 7) % 17) as f64 - 8.0, ((i + 2 * j) % 5) as f64));
        let b = vec![c(1.0, 0.0); n];
        let cfg = SolveConfig { max_iters: 3, restart: 2, ..Default::default() };
        match gmres_solve(&a, &b, &cfg) {
            Err(SolveError::NotConverged { iterations, residual, best }) => {
                assert!(iterations >= 3 && residual < 1.0 && best.len() == n);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let a = CMatrix::identity(2);
        let b = [c(1.0, 0.0); 2];
        assert!(gmres_solve(&a, &b, &SolveConfig { tol: 0.0, ..Default::default() }).is_err());
        assert!(gmres_solve(&a, &b, &SolveConfig { restart: 0, ..Default::default() }).is_err());
    }
}
