//! Closed-form reference fields for spheres, independent of the boundary
//! element code.
//!
//! Time dependence `e^{−iωt}`; `h_n = j_n + i y_n` is the outgoing
//! spherical Hankel function.
//!
//! Rigid sphere of radius `a` in the plane wave `A e^{ik d·r}`:
//!
//! `p_s(r, θ) = −A Σ_n (2n+1) iⁿ [j_n′(ka) / h_n′(ka)] h_n(kr) P_n(cos θ)`,
//!
//! with `θ` measured from `d`.
//!
//! Pulsating sphere with uniform normal velocity `v₀`:
//!
//! `p(r) = −iρck a² v₀ e^{ik(r−a)} / (r (1 − ika))`,
//!
//! the monopole whose radial Euler velocity `∂_r p / (iωρ)` equals `v₀` at
//! `r = a`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MieError {
    #[error("point {index} at radius {radius} is not outside the sphere")]
    PointInside { index: usize, radius: f64 },
    #[error("series truncated at {given} terms; {required} terms are needed")]
    Truncation { given: usize, required: usize },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Relative size of the last retained term that is accepted.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Largest order the recurrences are trusted for (Hankel overflow).
pub const MAX_ORDER: usize = 150;

/// `j_0..=j_nmax` at `x > 0` by Miller's downward recurrence.
pub fn spherical_jn(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_jn needs x > 0");
    let start = nmax + 20 + x.ceil() as usize + (4.0 * (nmax as f64 + x).sqrt()) as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for n in (1..=start).rev() {
        vals[n - 1] = (2 * n + 1) as f64 / x * vals[n] - vals[n + 1];
        if vals[n - 1].abs() > 1e250 {
            for v in vals[n - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() { j0 / vals[0] } else { j1 / vals[1] };
    vals.truncate(nmax + 1);
    vals.iter().map(|v| v * scale).collect()
}

/// `y_0..=y_nmax` at `x > 0` by upward recurrence.
pub fn spherical_yn(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_yn needs x > 0");
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(-x.cos() / x);
    if nmax >= 1 {
        out.push(-x.cos() / (x * x) - x.sin() / x);
    }
    for n in 1..nmax {
        let next = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        out.push(next);
    }
    out
}

/// Derivatives from `f_n′ = f_{n−1} − (n+1) f_n / x`, `f_0′ = −f_1`.
/// `f` must hold one order more than the derivatives wanted.
fn derivatives<T>(f: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    let mut out = Vec::with_capacity(f.len() - 1);
    out.push(-f[1]);
    for n in 1..f.len() - 1 {
        out.push(f[n - 1] - f[n] * ((n + 1) as f64 / x));
    }
    out
}

pub fn spherical_hn(nmax: usize, x: f64) -> Vec<Complex64> {
    spherical_jn(nmax, x)
        .into_iter()
        .zip(spherical_yn(nmax, x))
        .map(|(j, y)| Complex64::new(j, y))
        .collect()
}

/// `P_0..=P_nmax` at `t`.
pub fn legendre(nmax: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(nmax + 1);
    p.push(1.0);
    if nmax >= 1 {
        p.push(t);
    }
    for n in 1..nmax {
        let next = ((2 * n + 1) as f64 * t * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
        p.push(next);
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct MieConfig {
    pub a: f64,
    pub k: f64,
    /// Series length; `None` chooses the smallest count meeting the
    /// truncation test (at least `ceil(ka) + 10`).
    pub n_terms: Option<usize>,
    pub amplitude: Complex64,
    pub direction: [f64; 3],
}

impl MieConfig {
    pub fn unit_sphere(k: f64) -> Self {
        Self { a: 1.0, k, n_terms: None, amplitude: Complex64::new(1.0, 0.0), direction: [0.0, 0.0, 1.0] }
    }

    pub fn min_terms(&self) -> usize {
        (self.k * self.a).ceil() as usize + 10
    }

    fn validate(&self) -> Result<[f64; 3], MieError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(MieError::Invalid(format!("radius must be positive, got {}", self.a)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(MieError::Invalid(format!("wavenumber must be positive, got {}", self.k)));
        }
        let d = self.direction;
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(MieError::Invalid(format!("direction must be a unit vector, |d| = {n}")));
        }
        if let Some(nt) = self.n_terms {
            if nt < self.min_terms() {
                return Err(MieError::Truncation { given: nt, required: self.min_terms() });
            }
        }
        Ok(d)
    }

    /// Coefficients `c_n = (2n+1) iⁿ j_n′(ka)/h_n′(ka)` for `n ≤ nmax`.
    fn coefficients(&self, nmax: usize) -> Vec<Complex64> {
        let ka = self.k * self.a;
        let j = spherical_jn(nmax + 1, ka);
        let h = spherical_hn(nmax + 1, ka);
        let dj = derivatives(&j, ka);
        let dh = derivatives(&h, ka);
        let mut i_pow = Complex64::new(1.0, 0.0);
        (0..=nmax)
            .map(|n| {
                let c = i_pow * ((2 * n + 1) as f64) * (dj[n] / dh[n]);
                i_pow *= Complex64::new(0.0, 1.0);
                c
            })
            .collect()
    }

    /// Number of terms for which the last term at radius `r_min` is below
    /// the truncation tolerance relative to the largest term.
    pub fn required_terms(&self, r_min: f64) -> usize {
        let nmax = MAX_ORDER;
        let c = self.coefficients(nmax);
        let h = spherical_hn(nmax, self.k * r_min);
        let mags: Vec<f64> = c.iter().zip(&h).map(|(c, h)| (c * h).norm()).collect();
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        let mut n = self.min_terms();
        while n < nmax && mags[n - 1] > TRUNCATION_TOL * peak {
            n += 1;
        }
        n
    }

    fn resolve_terms(&self, r_min: f64) -> Result<usize, MieError> {
        let required = self.required_terms(r_min);
        match self.n_terms {
            None => Ok(required),
            Some(given) if given >= required => Ok(given),
            Some(given) => Err(MieError::Truncation { given, required }),
        }
    }
}

fn spherical(p: [f64; 3], d: [f64; 3]) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let c = ((p[0] * d[0] + p[1] * d[1] + p[2] * d[2]) / r).clamp(-1.0, 1.0);
    (r, c)
}

fn check_outside(a: f64, points: &[[f64; 3]]) -> Result<f64, MieError> {
    let mut r_min = f64::INFINITY;
    for (index, p) in points.iter().enumerate() {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if !(r > a) {
            return Err(MieError::PointInside { index, radius: r });
        }
        r_min = r_min.min(r);
    }
    Ok(r_min)
}

/// Scattered pressure of the rigid sphere at exterior points.
pub fn mie_scattered(cfg: &MieConfig, points: &[[f64; 3]]) -> Result<Vec<Complex64>, MieError> {
    let d = cfg.validate()?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let r_min = check_outside(cfg.a, points)?;
    let terms = cfg.resolve_terms(r_min)?;
    let c = cfg.coefficients(terms - 1);
    Ok(points
        .iter()
        .map(|&p| {
            let (r, cos_t) = spherical(p, d);
            let h = spherical_hn(terms - 1, cfg.k * r);
            let pl = legendre(terms - 1, cos_t);
            let sum: Complex64 = (0..terms).map(|n| c[n] * h[n] * pl[n]).sum();
            -cfg.amplitude * sum
        })
        .collect())
}

/// `∂p_s/∂r` of the series at radius `r` and angle `cos θ`.
pub fn mie_scattered_dr(cfg: &MieConfig, r: f64, cos_theta: f64) -> Result<Complex64, MieError> {
    cfg.validate()?;
    if r < cfg.a {
        return Err(MieError::PointInside { index: 0, radius: r });
    }
    let terms = cfg.resolve_terms(r)?;
    let c = cfg.coefficients(terms - 1);
    let h = spherical_hn(terms, cfg.k * r);
    let dh = derivatives(&h, cfg.k * r);
    let pl = legendre(terms - 1, cos_theta);
    let sum: Complex64 = (0..terms).map(|n| c[n] * dh[n] * pl[n]).sum();
    Ok(-cfg.amplitude * sum * cfg.k)
}

/// Field of a sphere pulsating with uniform normal velocity `v0`.
pub fn pulsating_sphere(
    a: f64,
    k: f64,
    v0: Complex64,
    rho: f64,
    c: f64,
    points: &[[f64; 3]],
) -> Result<Vec<Complex64>, MieError> {
    if !(a > 0.0 && k > 0.0 && rho > 0.0 && c > 0.0) {
        return Err(MieError::Invalid("radius, wavenumber, density and sound speed must be positive".into()));
    }
    check_outside(a, points)?;
    let pre = Complex64::new(0.0, -rho * c * k * a * a) * v0 / Complex64::new(1.0, -k * a);
    Ok(points
        .iter()
        .map(|p| {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            pre * Complex64::from_polar(1.0 / r, k * (r - a))
        })
        .collect())
}
