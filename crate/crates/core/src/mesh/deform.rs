//! Spline-driven radial deformation of a base mesh.
//!
//! The shape is described by `n_sectors × n_knots` control values. Each
//! sector carries a clamped cubic spline (zero end slopes, uniform knots)
//! of radial offset versus axial position; sectors are blended in azimuth
//! with hat functions of `sin²φ`, which keeps the blend even across both
//! planes through the axis. A vertex moves along its own radial direction
//! by the blended offset, scaled down linearly inside `taper_radius` so
//! that vertices on or near the axis stay put.
//!
//! The map from control values to vertex positions is linear, so its
//! dual-number evaluation is exact.

use crate::geometry::Vec3;
use crate::scalar::Real;

use super::{Mesh, MeshError};

/// Interpolating clamped cubic spline basis on uniform knots.
///
/// `eval(z)` returns the value of every cardinal basis function at `z`;
/// outside the knot span the spline is continued with its end value
/// (which is C¹ because the end slopes are zero).
#[derive(Clone, Debug, PartialEq)]
pub struct SplineBasis {
    z0: f64,
    z1: f64,
    /// Second derivatives at the knots for each cardinal basis function.
    moments: Vec<Vec<f64>>,
}

impl SplineBasis {
    pub fn new(z0: f64, z1: f64, n_knots: usize) -> Result<Self, MeshError> {
        if n_knots > 1 && !(z1 > z0) {
            return Err(MeshError::InvalidParams(format!("empty knot span [{z0}, {z1}]")));
        }
        let moments = (0..n_knots).map(|j| clamped_moments(n_knots, z1 - z0, j)).collect();
        Ok(Self { z0, z1, moments })
    }

    pub fn num_knots(&self) -> usize {
        self.moments.len()
    }

    pub fn knots(&self) -> Vec<f64> {
        let n = self.num_knots();
        if n <= 1 {
            return vec![self.z0; n];
        }
        (0..n).map(|i| self.z0 + (self.z1 - self.z0) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn eval(&self, z: f64) -> Vec<f64> {
        let n = self.num_knots();
        if n <= 1 {
            return vec![1.0; n];
        }
        let h = (self.z1 - self.z0) / (n - 1) as f64;
        let zc = z.clamp(self.z0, self.z1);
        let i = (((zc - self.z0) / h).floor() as usize).min(n - 2);
        let a = self.z0 + h * i as f64;
        let (l, r) = (a + h - zc, zc - a);
        (0..n)
            .map(|j| {
                let m = &self.moments[j];
                let yi = (i == j) as u8 as f64;
                let yi1 = (i + 1 == j) as u8 as f64;
                m[i] * l.powi(3) / (6.0 * h)
                    + m[i + 1] * r.powi(3) / (6.0 * h)
                    + (yi - m[i] * h * h / 6.0) * l / h
                    + (yi1 - m[i + 1] * h * h / 6.0) * r / h
            })
            .collect()
    }
}

/// Knot second derivatives of the clamped spline through the `j`-th unit
/// vector (tridiagonal solve).
fn clamped_moments(n: usize, span: f64, j: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let h = span / (n - 1) as f64;
    let y = |i: usize| (i == j) as u8 as f64;
    let mut sub = vec![h; n];
    let mut diag = vec![4.0 * h; n];
    let sup = vec![h; n];
    let mut rhs = vec![0.0; n];
    diag[0] = 2.0 * h;
    diag[n - 1] = 2.0 * h;
    rhs[0] = 6.0 * (y(1) - y(0)) / h;
    rhs[n - 1] = -6.0 * (y(n - 1) - y(n - 2)) / h;
    for i in 1..n - 1 {
        rhs[i] = 6.0 * (y(i + 1) - 2.0 * y(i) + y(i - 1)) / h;
    }
    // Thomas algorithm
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
        sub[i] = 0.0;
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}

/// Convenience: cardinal basis values of an `n_knots` spline on `[z0, z1]`.
pub fn spline_basis(z0: f64, z1: f64, n_knots: usize, z: f64) -> Result<Vec<f64>, MeshError> {
    Ok(SplineBasis::new(z0, z1, n_knots)?.eval(z))
}

/// Geometry of the shape parameterization (everything except the values).
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeBasis {
    pub axis_origin: Vec3<f64>,
    /// Unit profile axis.
    pub axis: Vec3<f64>,
    /// Unit reference direction (φ = 0) perpendicular to the axis.
    pub reference: Vec3<f64>,
    pub z_min: f64,
    pub z_max: f64,
    pub n_knots: usize,
    pub n_sectors: usize,
    pub taper_radius: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ShapeBasis {
    /// Axisymmetric basis about +z through the origin.
    pub fn axisymmetric(z_min: f64, z_max: f64, n_knots: usize) -> Self {
        Self {
            axis_origin: Vec3::c(0.0, 0.0, 0.0),
            axis: Vec3::c(0.0, 0.0, 1.0),
            reference: Vec3::c(1.0, 0.0, 0.0),
            z_min,
            z_max,
            n_knots,
            n_sectors: 1,
            taper_radius: 0.0,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn num_params(&self) -> usize {
        self.n_knots * self.n_sectors
    }

    fn validate(&self) -> Result<(), MeshError> {
        let bad = |m: &str| Err(MeshError::InvalidParams(m.into()));
        if (self.axis.norm() - 1.0).abs() > 1e-9 || (self.reference.norm() - 1.0).abs() > 1e-9 {
            return bad("axis and reference must be unit vectors");
        }
        if self.axis.dot(self.reference).abs() > 1e-9 {
            return bad("reference direction must be perpendicular to the axis");
        }
        if self.n_sectors == 0 {
            return bad("need at least one sector");
        }
        if !(self.taper_radius >= 0.0) {
            return bad("taper radius must be ≥ 0");
        }
        if !(self.lower <= self.upper) {
            return bad("lower bound above upper bound");
        }
        Ok(())
    }

    /// Azimuthal blending weight of each sector at azimuth with
    /// `sin²φ = s2`.
    fn sector_weights(&self, s2: f64) -> Vec<f64> {
        let n = self.n_sectors;
        if n == 1 {
            return vec![1.0];
        }
        let u = s2.clamp(0.0, 1.0) * (n - 1) as f64;
        (0..n).map(|m| (1.0 - (u - m as f64).abs()).max(0.0)).collect()
    }

    /// Per-vertex radial direction and coefficient row: the displacement of
    /// vertex `v` is `Σ_p coeff[v][p] · s_p · dir[v]`.
    pub fn vertex_map(&self, base: &Mesh<f64>) -> Result<DeformMap, MeshError> {
        self.validate()?;
        let spline = SplineBasis::new(self.z_min, self.z_max, self.n_knots)?;
        let e2 = self.axis.cross(self.reference);
        let mut dirs = Vec::with_capacity(base.num_vertices());
        let mut coeffs = Vec::with_capacity(base.num_vertices());
        let tiny = 1e-12 * base.extent().max(1e-300);
        for &p in base.vertices() {
            let rel = p - self.axis_origin;
            let z = rel.dot(self.axis);
            let radial = rel - self.axis * z;
            let r = radial.norm();
            if r <= tiny {
                dirs.push(Vec3::c(0.0, 0.0, 0.0));
                coeffs.push(vec![0.0; self.num_params()]);
                continue;
            }
            let dir = radial * (1.0 / r);
            let s2 = dir.dot(e2).powi(2);
            let taper = if self.taper_radius > 0.0 { (r / self.taper_radius).min(1.0) } else { 1.0 };
            let along = spline.eval(z);
            let around = self.sector_weights(s2);
            let mut row = Vec::with_capacity(self.num_params());
            for w in &around {
                for b in &along {
                    row.push(w * b * taper);
                }
            }
            dirs.push(dir);
            coeffs.push(row);
        }
        Ok(DeformMap { dirs, coeffs })
    }
}

/// Precomputed linear map from control values to vertex displacements.
#[derive(Clone, Debug)]
pub struct DeformMap {
    dirs: Vec<Vec3<f64>>,
    coeffs: Vec<Vec<f64>>,
}

impl DeformMap {
    /// Displaced vertex positions for control values `s` of any scalar type.
    pub fn apply<T: Real>(&self, base: &Mesh<f64>, s: &[T]) -> Vec<Vec3<T>> {
        base.vertices()
            .iter()
            .zip(self.dirs.iter().zip(&self.coeffs))
            .map(|(&p, (&dir, row))| {
                let mut amount = T::zero();
                for (c, &sp) in row.iter().zip(s) {
                    if *c != 0.0 {
                        amount += sp * T::lift(*c);
                    }
                }
                Vec3::lift(p) + Vec3::lift(dir).scale(amount)
            })
            .collect()
    }

    /// `∂V/∂s_p` for every vertex.
    pub fn direction(&self, p: usize) -> Vec<Vec3<f64>> {
        self.dirs.iter().zip(&self.coeffs).map(|(&d, row)| d * row[p]).collect()
    }
}

/// Spline control values plus the basis they refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeParams {
    pub values: Vec<f64>,
    pub basis: ShapeBasis,
}

impl ShapeParams {
    pub fn new(values: Vec<f64>, basis: ShapeBasis) -> Result<Self, MeshError> {
        let p = Self { values, basis };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(basis: ShapeBasis) -> Self {
        Self { values: vec![0.0; basis.num_params()], basis }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        self.basis.validate()?;
        if self.values.len() != self.basis.num_params() {
            return Err(MeshError::InvalidParams(format!(
                "{} values for {} parameters",
                self.values.len(),
                self.basis.num_params()
            )));
        }
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeshError::InvalidParams(format!("parameter {i} is not finite")));
            }
            if v < self.basis.lower || v > self.basis.upper {
                return Err(MeshError::InvalidParams(format!(
                    "parameter {i} = {v} outside [{}, {}]",
                    self.basis.lower, self.basis.upper
                )));
            }
        }
        Ok(())
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, MeshError> {
        Self::new(values, self.basis.clone())
    }
}

/// Deform `base` by `params` (plain `f64`).
pub fn deform(base: &Mesh<f64>, params: &ShapeParams) -> Result<Mesh<f64>, MeshError> {
    params.validate()?;
    if params.values.iter().all(|&v| v == 0.0) {
        return Ok(base.clone());
    }
    let map = params.basis.vertex_map(base)?;
    let vertices = map.apply(base, &params.values);
    Mesh::with_groups(vertices, base.elements().to_vec(), base.groups().to_vec())
}

/// Deform `base` with control values of any scalar type, e.g. dual numbers
/// seeded along one parameter direction.
pub fn deform_with<T: Real>(
    base: &Mesh<f64>,
    map: &DeformMap,
    values: &[T],
) -> Result<Mesh<T>, MeshError> {
    let vertices = map.apply(base, values);
    Mesh::with_groups(vertices, base.elements().to_vec(), base.groups().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_icosphere, make_revolution, ProfileSegment, RevolutionSpec};
    use crate::scalar::Dual64;

    /// Independent oracle: clamped spline via its Hermite slopes, solved
    /// densely from C² continuity at the interior knots.
    fn hermite_oracle(y: &[f64], z0: f64, z1: f64, z: f64) -> f64 {
        let n = y.len();
        let h = (z1 - z0) / (n - 1) as f64;
        // slopes d_0 = d_{n-1} = 0; interior: d_{i-1} + 4 d_i + d_{i+1} = 3 (y_{i+1} - y_{i-1}) / h
        let m = n.saturating_sub(2);
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for r in 0..m {
            let i = r + 1;
            a[r][r] = 4.0;
            if r > 0 {
                a[r][r - 1] = 1.0;
            }
            if r + 1 < m {
                a[r][r + 1] = 1.0;
            }
            b[r] = 3.0 * (y[i + 1] - y[i - 1]) / h;
        }
        // Gaussian elimination
        for c in 0..m {
            for r in c + 1..m {
                let f = a[r][c] / a[c][c];
                for k in c..m {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut d_int = vec![0.0; m];
        for c in (0..m).rev() {
            let s: f64 = (c + 1..m).map(|k| a[c][k] * d_int[k]).sum();
            d_int[c] = (b[c] - s) / a[c][c];
        }
        let mut d = vec![0.0; n];
        d[1..n - 1].copy_from_slice(&d_int);
        let zc = z.clamp(z0, z1);
        let i = (((zc - z0) / h).floor() as usize).min(n - 2);
        let t = (zc - (z0 + i as f64 * h)) / h;
        let (h00, h10, h01, h11) = (
            2.0 * t.powi(3) - 3.0 * t * t + 1.0,
            t.powi(3) - 2.0 * t * t + t,
            -2.0 * t.powi(3) + 3.0 * t * t,
            t.powi(3) - t * t,
        );
        h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1]
    }

    #[test]
    fn spline_matches_hermite_oracle() {
        let y = [0.3, -0.1, 0.25, 0.0, 0.4, -0.2];
        let basis = SplineBasis::new(-1.0, 2.0, y.len()).unwrap();
        for k in 0..=60 {
            let z = -1.2 + 3.4 * k as f64 / 60.0;
            let got: f64 = basis.eval(z).iter().zip(&y).map(|(b, v)| b * v).sum();
            let want = hermite_oracle(&y, -1.0, 2.0, z);
            assert!((got - want).abs() < 1e-12, "z = {z}: {got} vs {want}");
        }
    }

    #[test]
    fn spline_interpolates_and_partitions_unity() {
        let b = SplineBasis::new(0.0, 1.0, 5).unwrap();
        for (i, z) in b.knots().into_iter().enumerate() {
            let v = b.eval(z);
            for (j, x) in v.iter().enumerate() {
                assert!((x - (i == j) as u8 as f64).abs() < 1e-14);
            }
        }
        let s: f64 = b.eval(0.37).iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    fn cylinder() -> Mesh {
        make_revolution(&RevolutionSpec {
            start: (0.0, 0.0),
            segments: vec![
                ProfileSegment { end: (0.3, 0.0), divisions: 2, group: 0 },
                ProfileSegment { end: (0.3, 1.0), divisions: 8, group: 0 },
                ProfileSegment { end: (0.0, 1.0), divisions: 2, group: 1 },
            ],
            azimuth_divisions: 12,
            quadrant: false,
        })
        .unwrap()
    }

    #[test]
    fn zero_params_are_identity() {
        let m = make_icosphere(1, 1.0).unwrap();
        let p = ShapeParams::zeros(ShapeBasis::axisymmetric(-1.0, 1.0, 4));
        let d = deform(&m, &p).unwrap();
        assert_eq!(d.vertices(), m.vertices());
        // through the generic path as well
        let map = p.basis.vertex_map(&m).unwrap();
        let g = deform_with(&m, &map, &p.values).unwrap();
        for (a, b) in g.vertices().iter().zip(m.vertices()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_basis_has_no_parameters() {
        let m = make_icosphere(1, 1.0).unwrap();
        let basis = ShapeBasis::axisymmetric(-1.0, 1.0, 0);
        assert_eq!(basis.num_params(), 0);
        let map = basis.vertex_map(&m).unwrap();
        let g = deform_with::<f64>(&m, &map, &[]).unwrap();
        assert_eq!(g.vertices(), m.vertices());
    }

    #[test]
    fn midpoint_control_pushes_mid_ring_outward() {
        let m = cylinder();
        let basis = ShapeBasis::axisymmetric(0.0, 1.0, 5);
        let mut values = vec![0.0; 5];
        values[2] = 0.1;
        let p = ShapeParams::new(values.clone(), basis).unwrap();
        let d = deform(&m, &p).unwrap();
        for (a, b) in m.vertices().iter().zip(d.vertices()) {
            let r0 = (a.x * a.x + a.y * a.y).sqrt();
            let r1 = (b.x * b.x + b.y * b.y).sqrt();
            if r0 < 1e-12 {
                assert_eq!(a, b);
                continue;
            }
            let want = hermite_oracle(&values, 0.0, 1.0, a.z);
            assert!((r1 - r0 - want).abs() < 1e-12);
            assert_eq!(a.z, b.z);
        }
        let mid = d.vertices().iter().filter(|v| (v.z - 0.5).abs() < 1e-12).count();
        assert!(mid > 0);
    }

    #[test]
    fn dual_direction_matches_finite_differences() {
        let m = cylinder();
        let mut basis = ShapeBasis::axisymmetric(0.0, 1.0, 3);
        basis.n_sectors = 2;
        basis.taper_radius = 0.1;
        let s0 = vec![0.02, -0.01, 0.03, 0.0, 0.01, -0.02];
        let map = basis.vertex_map(&m).unwrap();
        let h = 1e-6;
        for p in 0..s0.len() {
            let dual: Vec<Dual64> =
                s0.iter().enumerate().map(|(k, &v)| Dual64::new(v, (k == p) as u8 as f64)).collect();
            let vd = map.apply(&m, &dual);
            let mut sp = s0.clone();
            sp[p] += h;
            let mut sm = s0.clone();
            sm[p] -= h;
            let (vp, vm) = (map.apply(&m, &sp), map.apply(&m, &sm));
            let scale = vd.iter().map(|v| v.x.eps.abs().max(v.y.eps.abs())).fold(0.0, f64::max);
            for k in 0..vd.len() {
                let fd = (vp[k] - vm[k]) * (0.5 / h);
                let ad = Vec3::c(vd[k].x.eps, vd[k].y.eps, vd[k].z.eps);
                assert!((fd - ad).norm() <= 1e-6 * scale.max(1e-300), "param {p} vertex {k}");
            }
        }
    }

    #[test]
    fn sector_blend_is_mirror_symmetric() {
        let mut basis = ShapeBasis::axisymmetric(0.0, 1.0, 2);
        basis.n_sectors = 2;
        let m = cylinder();
        let map = basis.vertex_map(&m).unwrap();
        let s: [f64; 4] = [0.0, 0.0, 0.05, 0.05];
        let d = map.apply(&m, &s);
        // sector 1 (φ = 90°) only: displacement ∝ sin²φ
        for (a, b) in m.vertices().iter().zip(&d) {
            let r0 = (a.x * a.x + a.y * a.y).sqrt();
            if r0 > 0.29 {
                let s2 = (a.y / r0).powi(2);
                let r1 = (b.x * b.x + b.y * b.y).sqrt();
                assert!((r1 - r0 - 0.05 * s2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounds_are_enforced() {
        let mut basis = ShapeBasis::axisymmetric(0.0, 1.0, 2);
        basis.lower = -0.1;
        basis.upper = 0.1;
        assert!(ShapeParams::new(vec![0.0, 0.2], basis.clone()).is_err());
        assert!(ShapeParams::new(vec![0.0, f64::NAN], basis.clone()).is_err());
        assert!(ShapeParams::new(vec![0.0], basis).is_err());
    }

    #[test]
    fn collapsing_deformation_reports_element() {
        let m = cylinder();
        let basis = ShapeBasis::axisymmetric(0.0, 1.0, 2);
        // radius 0.3 pulled in by 0.3 at both ends collapses the side wall
        let err = deform(&m, &ShapeParams::new(vec![-0.3, -0.3], basis).unwrap()).unwrap_err();
        assert!(matches!(err, MeshError::Degenerate { .. }));
    }
}
