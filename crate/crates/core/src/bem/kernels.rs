//! Free-space Helmholtz kernel `G = e^{ikd} / (4π d)` and its derivatives.
//!
//! `x` is always the field (collocation/observation) point and `y` the
//! source point on the surface; `d = |x − y|`. With `G'(d) = (ik − 1/d) G`:
//!
//! - `∂G/∂n_y = G' (y − x)·n_y / d`
//! - `∂G/∂n_x = G' (x − y)·n_x / d`
//! - `∂²G/∂n_x∂n_y = −[(G'' − G'/d)(R·n_x)(R·n_y)/d² + (G'/d) n_x·n_y]`, `R = x − y`,
//!   `G'' = G/d² + (ik − 1/d)² G`.

use num_complex::Complex;

use super::BemError;
use crate::geometry::Vec3;
use crate::scalar::{cis, Real};

/// Value and radial derivative `(G, dG/dd)` at distance `d > 0`.
#[inline]
pub(crate) fn radial<T: Real>(d: T, k: T) -> (Complex<T>, Complex<T>) {
    let g = cis(k * d) * (T::lift(0.25 * std::f64::consts::FRAC_1_PI) / d);
    let gp = g * Complex::new(-d.recip(), k);
    (g, gp)
}

#[inline]
fn distance<T: Real>(x: Vec3<T>, y: Vec3<T>) -> Result<T, BemError> {
    let d = (x - y).norm();
    if d > T::zero() {
        Ok(d)
    } else {
        Err(BemError::CoincidentPoints)
    }
}

pub fn greens<T: Real>(x: Vec3<T>, y: Vec3<T>, k: T) -> Result<Complex<T>, BemError> {
    Ok(radial(distance(x, y)?, k).0)
}

/// Derivative along the unit normal `n_y` at the source point.
pub fn greens_dn<T: Real>(x: Vec3<T>, y: Vec3<T>, n_y: Vec3<T>, k: T) -> Result<Complex<T>, BemError> {
    let d = distance(x, y)?;
    let (_, gp) = radial(d, k);
    Ok(gp * ((y - x).dot(n_y) / d))
}

/// Derivative along the unit normal `n_x` at the field point.
pub fn greens_dnx<T: Real>(x: Vec3<T>, y: Vec3<T>, n_x: Vec3<T>, k: T) -> Result<Complex<T>, BemError> {
    let d = distance(x, y)?;
    let (_, gp) = radial(d, k);
    Ok(gp * ((x - y).dot(n_x) / d))
}

/// Gradient of `G` with respect to the field point.
pub fn greens_grad_x<T: Real>(x: Vec3<T>, y: Vec3<T>, k: T) -> Result<[Complex<T>; 3], BemError> {
    let d = distance(x, y)?;
    let (_, gp) = radial(d, k);
    let r = (x - y).scale(d.recip());
    Ok([gp * r.x, gp * r.y, gp * r.z])
}

/// Mixed second normal derivative (the hypersingular kernel).
pub fn greens_dndn<T: Real>(
    x: Vec3<T>,
    y: Vec3<T>,
    n_x: Vec3<T>,
    n_y: Vec3<T>,
    k: T,
) -> Result<Complex<T>, BemError> {
    let d = distance(x, y)?;
    Ok(dndn_at(x - y, d, n_x, n_y, k))
}

#[inline]
pub(crate) fn dndn_at<T: Real>(r: Vec3<T>, d: T, n_x: Vec3<T>, n_y: Vec3<T>, k: T) -> Complex<T> {
    let (g, gp) = radial(d, k);
    let inv = d.recip();
    let a = Complex::new(-inv, k);
    let gpp = g * (a * a + inv * inv);
    let rr = r.dot(n_x) * r.dot(n_y) * inv * inv;
    -((gpp - gp * inv) * rr + gp * (n_x.dot(n_y) * inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_vec(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        Vec3::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn rel(a: Complex<f64>, b: Complex<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn static_kernel_at_unit_distance() {
        let g = greens(Vec3::c(0.0, 0.0, 0.0), Vec3::c(1.0, 0.0, 0.0), 0.0).unwrap();
        assert!((g.re - 0.079_577_471_545_947_67).abs() < 1e-15);
        assert_eq!(g.im, 0.0);
    }

    #[test]
    fn full_period_phase_is_real() {
        let d = 0.7;
        let k = 2.0 * PI / d;
        let g = greens(Vec3::c(0.0, 0.0, 0.0), Vec3::c(0.0, d, 0.0), k).unwrap();
        assert!((g.re - 1.0 / (4.0 * PI * d)).abs() < 1e-14);
        assert!(g.im.abs() < 1e-14);
    }

    #[test]
    fn reciprocity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (a, b) = (rand_vec(&mut rng), rand_vec(&mut rng));
            let k = rng.gen_range(0.0..10.0);
            assert_eq!(greens(a, b, k).unwrap(), greens(b, a, k).unwrap());
        }
    }

    #[test]
    fn coincident_points_are_rejected() {
        let p = Vec3::c(0.3, 0.1, 0.2);
        assert!(matches!(greens(p, p, 1.0), Err(BemError::CoincidentPoints)));
        assert!(greens_dn(p, p, Vec3::c(0.0, 0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn static_dipole_sign() {
        let x = Vec3::c(0.0, 0.0, 0.0);
        let y = Vec3::c(0.0, 0.0, 1.0);
        let v = greens_dn(x, y, Vec3::c(0.0, 0.0, 1.0), 0.0).unwrap();
        assert!((v.re + 1.0 / (4.0 * PI)).abs() < 1e-15 && v.im == 0.0);
        let perp = greens_dn(x, y, Vec3::c(1.0, 0.0, 0.0), 3.0).unwrap();
        assert_eq!(perp, Complex::new(0.0, 0.0));
    }

    #[test]
    fn normal_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = rand_vec(&mut rng);
            let y = rand_vec(&mut rng);
            let nx = rand_vec(&mut rng).normalized();
            let ny = rand_vec(&mut rng).normalized();
            let k = rng.gen_range(0.1..8.0);
            let d = (x - y).norm();
            let h = 1e-7 * d;
            let fd_y = (greens(x, y + ny * h, k).unwrap() - greens(x, y - ny * h, k).unwrap()) / (2.0 * h);
            let an_y = greens_dn(x, y, ny, k).unwrap();
            // FD error is relative to the gradient size, not the projection
            let scale_y = greens_grad_x(x, y, k).unwrap().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!((fd_y - an_y).norm() < 1e-5 * scale_y, "dn_y {fd_y} vs {an_y}");
            let fd_x = (greens(x + nx * h, y, k).unwrap() - greens(x - nx * h, y, k).unwrap()) / (2.0 * h);
            let an_x = greens_dnx(x, y, nx, k).unwrap();
            assert!((fd_x - an_x).norm() < 1e-5 * scale_y, "dn_x {fd_x} vs {an_x}");
            let hh = 1e-5 * d;
            let fd_xy = (greens_dn(x + nx * hh, y, ny, k).unwrap() - greens_dn(x - nx * hh, y, ny, k).unwrap())
                / (2.0 * hh);
            let an_xy = greens_dndn(x, y, nx, ny, k).unwrap();
            let scale_xy = (k * k + 3.0 / (d * d) + 3.0 * k / d) / (4.0 * PI * d);
            assert!((fd_xy - an_xy).norm() < 1e-5 * scale_xy, "dndn {fd_xy} vs {an_xy}");
        }
    }

    #[test]
    fn aligned_derivative_relative_accuracy() {
        // when the normal is along the separation the projection is not small
        let x = Vec3::c(0.1, -0.2, 0.3);
        let y = Vec3::c(0.6, 0.4, -0.1);
        let n = (y - x).normalized();
        let k = 2.5;
        let h = 1e-7 * (x - y).norm();
        let fd = (greens(x, y + n * h, k).unwrap() - greens(x, y - n * h, k).unwrap()) / (2.0 * h);
        assert!(rel(greens_dn(x, y, n, k).unwrap(), fd) < 1e-5);
    }
}
