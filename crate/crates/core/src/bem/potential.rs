//! Boundary-to-domain evaluation `p(z) = Σ_j [u_j ∫∂G/∂n_y − q_j ∫G]`.
//!
//! For rigid scattering `u` is the total surface pressure, `q = 0`, and the
//! result is the scattered field. For radiation the result is the radiated
//! field.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;

use super::assembly::{class_by_distance, image_sources};
use super::integrate::{pair, Need, Source};
use super::quadrature::{QuadratureRule, RuleSet};
use super::{BemError, FarRule, WaveConfig};
use crate::geometry::Vec3;
use crate::linalg::CMatrix;
use crate::mesh::{Mesh, DEFAULT_NEAR_FACTOR};
use crate::scalar::{clift, Real};

/// Points closer than this many element diameters get a warning.
pub const MIN_CLEARANCE: f64 = 0.5;

pub struct PotentialEvaluator<T: Real> {
    sources: Vec<Vec<Source<T>>>,
    diam: Vec<f64>,
    k: T,
    rules: RuleSet,
    far_rule: QuadratureRule,
    q: Option<Vec<Complex<T>>>,
}

impl<T: Real> PotentialEvaluator<T> {
    pub fn new(mesh: &Mesh<T>, cfg: &WaveConfig) -> Result<Self, BemError> {
        cfg.validate(mesh.num_elements())?;
        let rules = RuleSet::new(cfg.quadrature.polar_order);
        let far_rule = match cfg.quadrature.far_rule {
            FarRule::Low => rules.low.clone(),
            FarRule::High => rules.high.clone(),
        };
        Ok(Self {
            sources: image_sources(mesh, &cfg.symmetry.reflections()),
            diam: mesh.diameters().iter().map(|d| d.value()).collect(),
            k: T::lift(cfg.k),
            rules,
            far_rule,
            q: cfg.neumann_data().map(|q| q.into_iter().map(clift::<T>).collect()),
        })
    }

    pub fn num_elements(&self) -> usize {
        self.diam.len()
    }

    /// Smallest centroid distance to any element (image), in diameters.
    pub fn clearance(&self, z: Vec3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for srcs in &self.sources {
            for (j, s) in srcs.iter().enumerate() {
                let c = (s.tri[0] + s.tri[1] + s.tri[2]).value().scale(1.0 / 3.0);
                best = best.min((z - c).norm() / self.diam[j]);
            }
        }
        best
    }

    /// Fill the row of `P` (coefficients of `u`) for point `z` and return
    /// the `u`-independent part `−Σ S_zj q_j`.
    pub fn row(&self, z: Vec3<T>, out: &mut [Complex<T>]) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let plain = Need { adjoint: false, hyper: false };
        let zf = z.value();
        let mut offset = zero;
        for (j, slot) in out.iter_mut().enumerate() {
            let mut a = zero;
            for srcs in &self.sources {
                let s = &srcs[j];
                let c = (s.tri[0] + s.tri[1] + s.tri[2]).value().scale(1.0 / 3.0);
                let class = class_by_distance((zf - c).norm(), self.diam[j], DEFAULT_NEAR_FACTOR);
                let v = pair(z, s.normal, s, self.k, class, &self.rules, &self.far_rule, plain);
                a += v.dl;
                if let Some(q) = &self.q {
                    offset -= v.s * q[j];
                }
            }
            *slot = a;
        }
        offset
    }

    pub fn eval(&self, z: Vec3<T>, u: &[Complex64], buf: &mut Vec<Complex<T>>) -> Complex<T> {
        buf.clear();
        buf.resize(self.num_elements(), Complex::new(T::zero(), T::zero()));
        let mut acc = self.row(z, buf);
        for (a, uj) in buf.iter().zip(u) {
            acc += *a * clift::<T>(*uj);
        }
        acc
    }
}

fn warn_close(ev: &PotentialEvaluator<f64>, points: &[Vec3<f64>]) {
    let close = points.iter().filter(|p| ev.clearance(**p) < MIN_CLEARANCE).count();
    if close > 0 {
        log::warn!("{close} evaluation point(s) closer than {MIN_CLEARANCE} element diameters; accuracy degraded");
    }
}

/// Domain field at `points` from the boundary solution `u`.
pub fn evaluate_potential(
    mesh: &Mesh<f64>,
    cfg: &WaveConfig,
    u: &[Complex64],
    points: &[Vec3<f64>],
) -> Result<Vec<Complex64>, BemError> {
    if u.len() != mesh.num_elements() {
        return Err(BemError::Dimension { expected: mesh.num_elements(), got: u.len() });
    }
    let ev = PotentialEvaluator::new(mesh, cfg)?;
    warn_close(&ev, points);
    Ok(points
        .par_iter()
        .map_init(Vec::new, |buf, &z| ev.eval(z, u, buf))
        .collect())
}

/// The potential operator `P` (rows = points) and offset `c` with
/// `p = P u + c`.
pub fn potential_matrix(
    mesh: &Mesh<f64>,
    cfg: &WaveConfig,
    points: &[Vec3<f64>],
) -> Result<(CMatrix, Vec<Complex64>), BemError> {
    let ev = PotentialEvaluator::new(mesh, cfg)?;
    warn_close(&ev, points);
    let n = mesh.num_elements();
    let mut p = CMatrix::zeros(points.len(), n);
    let mut offset = vec![Complex64::new(0.0, 0.0); points.len()];
    p.data_mut()
        .par_chunks_mut(n.max(1))
        .zip(offset.par_iter_mut())
        .zip(points.par_iter())
        .for_each(|((row, c), &z)| *c = ev.row(z, row));
    Ok((p, offset))
}
