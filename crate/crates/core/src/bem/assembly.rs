//! Collocation matrix and right-hand side.
//!
//! Rows are built independently (one collocation point each), so the same
//! code serves the dense `f64` assembly and the dual-number directional
//! derivatives used by the adjoint, which contract each row with the primal
//! solution without storing it.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;

use super::conventions::JUMP;
use super::integrate::{pair, Need, PairIntegrals, Source};
use super::quadrature::{QuadratureRule, RuleSet};
use super::{BemError, BoundaryCondition, FarRule, Formulation, WaveConfig};
use crate::geometry::Vec3;
use crate::linalg::CMatrix;
use crate::mesh::{AdjacencyClass, Mesh, PairClass, Reflection};
use crate::scalar::{clift, Real};

/// Assembled system `A x = b`.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    /// `N × N`, or `(N + M) × N` with `M` CHIEF rows.
    pub entries: CMatrix,
    pub rhs: Vec<Complex64>,
    pub k: f64,
    pub formulation: Formulation,
}

impl OperatorMatrix {
    pub fn num_elements(&self) -> usize {
        self.entries.cols()
    }

    pub fn is_least_squares(&self) -> bool {
        self.entries.rows() > self.entries.cols()
    }
}

/// Class of a free point against an element, from the centroid distance
/// in units of the element diameter.
pub(crate) fn class_by_distance(dist: f64, diam: f64, near_factor: f64) -> PairClass {
    if dist < diam {
        PairClass::SharedEdge
    } else if dist < near_factor * diam {
        PairClass::RegularNear
    } else {
        PairClass::RegularFar
    }
}

/// Flat source triangles for every symmetry image, `[image][element]`.
pub(crate) fn image_sources<T: Real>(mesh: &Mesh<T>, images: &[Reflection]) -> Vec<Vec<Source<T>>> {
    images
        .iter()
        .map(|r| {
            (0..mesh.num_elements())
                .map(|j| Source::new(r.apply_triangle(mesh.element_vertices(j))))
                .collect()
        })
        .collect()
}

pub struct Assembler<'a, T: Real> {
    mesh: &'a Mesh<T>,
    classes: &'a AdjacencyClass,
    cfg: &'a WaveConfig,
    k: T,
    eta: Complex<T>,
    need: Need,
    rules: RuleSet,
    far_rule: QuadratureRule,
    sources: Vec<Vec<Source<T>>>,
    q: Option<Vec<Complex<T>>>,
}

impl<'a, T: Real> Assembler<'a, T> {
    pub fn new(mesh: &'a Mesh<T>, cfg: &'a WaveConfig, classes: &'a AdjacencyClass) -> Result<Self, BemError> {
        let n = mesh.num_elements();
        cfg.validate(n)?;
        if classes.num_elements() != n {
            return Err(BemError::Dimension { expected: n, got: classes.num_elements() });
        }
        if classes.symmetry() != cfg.symmetry {
            return Err(BemError::InvalidConfig("pair classification was built for a different symmetry".into()));
        }
        if cfg.formulation == Formulation::Chief {
            let base = mesh.to_f64();
            for p in &cfg.chief_points {
                if winding_number(&base, cfg.symmetry, *p) < 0.5 {
                    return Err(BemError::InvalidConfig(format!("CHIEF point {:?} is not inside the surface", p.to_array())));
                }
            }
        }
        let eta = clift::<T>(cfg.eta());
        let bm = cfg.formulation == Formulation::BurtonMiller;
        let q = cfg.neumann_data().map(|q| q.into_iter().map(clift::<T>).collect());
        let rules = RuleSet::new(cfg.quadrature.polar_order);
        let far_rule = match cfg.quadrature.far_rule {
            FarRule::Low => rules.low.clone(),
            FarRule::High => rules.high.clone(),
        };
        Ok(Self {
            mesh,
            classes,
            cfg,
            k: T::lift(cfg.k),
            eta,
            need: Need { adjoint: bm && q.is_some(), hyper: bm },
            rules,
            far_rule,
            sources: image_sources(mesh, &cfg.symmetry.reflections()),
            q,
        })
    }

    pub fn num_rows(&self) -> usize {
        let chief = if self.cfg.formulation == Formulation::Chief { self.cfg.chief_points.len() } else { 0 };
        self.mesh.num_elements() + chief
    }

    pub fn num_cols(&self) -> usize {
        self.mesh.num_elements()
    }

    #[inline]
    fn integrals(&self, x: Vec3<T>, nx: Vec3<T>, image: usize, j: usize, class: PairClass) -> PairIntegrals<T> {
        pair(x, nx, &self.sources[image][j], self.k, class, &self.rules, &self.far_rule, self.need)
    }

    /// Fill row `r` of `A` into `row` and return `b_r`.
    pub fn fill_row(&self, r: usize, row: &mut [Complex<T>]) -> Complex<T> {
        let n = self.mesh.num_elements();
        if r >= n {
            return self.fill_chief_row(r - n, row);
        }
        let zero = Complex::new(T::zero(), T::zero());
        let x = self.mesh.centroid(r);
        let nx = self.mesh.normal(r);
        let mut rhs = zero;
        for (j, slot) in row.iter_mut().enumerate() {
            let mut a = zero;
            for m in 0..self.sources.len() {
                let class = self.classes.get_image(m, r, j);
                let v = self.integrals(x, nx, m, j, class);
                a -= v.dl + self.eta * v.hyp;
                if let Some(q) = &self.q {
                    rhs -= (v.s + self.eta * v.adl) * q[j];
                }
            }
            *slot = a;
        }
        row[r] += T::lift(JUMP);
        match &self.cfg.bc {
            BoundaryCondition::RigidScattering(w) => {
                rhs = w.value(x, self.k) + self.eta * w.normal_derivative(x, nx, self.k);
            }
            BoundaryCondition::NeumannRadiation { .. } => {
                let q = self.q.as_ref().expect("radiation data");
                rhs -= self.eta * q[r] * T::lift(JUMP);
            }
        }
        rhs
    }

    /// Interior CHIEF row: `Σ_j K_zj p_j = −p_inc(z)` (rigid) or
    /// `Σ_j K_zj p_j = Σ_j S_zj q_j` (radiation).
    fn fill_chief_row(&self, c: usize, row: &mut [Complex<T>]) -> Complex<T> {
        let z = Vec3::lift(self.cfg.chief_points[c]);
        let zero = Complex::new(T::zero(), T::zero());
        let plain = Need { adjoint: false, hyper: false };
        let mut rhs = zero;
        for (j, slot) in row.iter_mut().enumerate() {
            let mut a = zero;
            for srcs in &self.sources {
                let src = &srcs[j];
                let c = barycenter(src);
                let class = class_by_distance(
                    (z - c).norm().value(),
                    self.mesh.diameter(j).value(),
                    self.classes.near_factor(),
                );
                let v = pair(z, src.normal, src, self.k, class, &self.rules, &self.far_rule, plain);
                a += v.dl;
                if let Some(q) = &self.q {
                    rhs += v.s * q[j];
                }
            }
            *slot = a;
        }
        if let BoundaryCondition::RigidScattering(w) = &self.cfg.bc {
            rhs = -w.value(z, self.k);
        }
        rhs
    }

    /// `(A x − b)_r` for a fixed primal vector, without keeping the row.
    pub fn residual_row(&self, r: usize, x: &[Complex64], buf: &mut Vec<Complex<T>>) -> Complex<T> {
        buf.clear();
        buf.resize(self.num_cols(), Complex::new(T::zero(), T::zero()));
        let b = self.fill_row(r, buf);
        let mut acc = -b;
        for (a, xj) in buf.iter().zip(x) {
            acc += *a * clift::<T>(*xj);
        }
        acc
    }
}

#[inline]
fn barycenter<T: Real>(s: &Source<T>) -> Vec3<T> {
    (s.tri[0] + s.tri[1] + s.tri[2]).scale(T::lift(1.0 / 3.0))
}

/// Dense assembly of the collocation system on an `f64` mesh.
pub fn assemble(mesh: &Mesh<f64>, cfg: &WaveConfig, classes: &AdjacencyClass) -> Result<OperatorMatrix, BemError> {
    let asm = Assembler::new(mesh, cfg, classes)?;
    let (rows, cols) = (asm.num_rows(), asm.num_cols());
    let mut entries = CMatrix::zeros(rows, cols);
    let mut rhs = vec![Complex64::new(0.0, 0.0); rows];
    entries
        .data_mut()
        .par_chunks_mut(cols.max(1))
        .zip(rhs.par_iter_mut())
        .enumerate()
        .for_each(|(r, (row, b))| *b = asm.fill_row(r, row));
    for r in 0..rows {
        for (c, v) in entries.row(r).iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(BemError::NonFinite { row: r, col: c });
            }
        }
        if !(rhs[r].re.is_finite() && rhs[r].im.is_finite()) {
            return Err(BemError::NonFinite { row: r, col: cols });
        }
    }
    Ok(OperatorMatrix { entries, rhs, k: cfg.k, formulation: cfg.formulation })
}

/// Generalized winding number of a closed surface (with its symmetry
/// images) about `p`: ≈ 1 inside, ≈ 0 outside.
pub fn winding_number(mesh: &Mesh<f64>, symmetry: crate::mesh::Symmetry, p: Vec3<f64>) -> f64 {
    let mut omega = 0.0;
    for r in symmetry.reflections() {
        for e in 0..mesh.num_elements() {
            let [a, b, c] = r.apply_triangle(mesh.element_vertices(e)).map(|v| v - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(b.cross(c));
            let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
            omega += 2.0 * num.atan2(den);
        }
    }
    omega / (4.0 * std::f64::consts::PI)
}
