use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::BemError;
use crate::geometry::Vec3;
use crate::scalar::{cis, clift, Real};

/// Incident plane wave `p_i(r) = A e^{ik d·r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub direction: [f64; 3],
    pub amplitude: Complex<f64>,
}

impl PlaneWave {
    pub fn along_z(amplitude: Complex<f64>) -> Self {
        Self { direction: [0.0, 0.0, 1.0], amplitude }
    }

    pub fn validate(&self) -> Result<(), BemError> {
        let n = Vec3::c(self.direction[0], self.direction[1], self.direction[2]).norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(BemError::InvalidConfig(format!("plane-wave direction must be a unit vector, |d| = {n}")));
        }
        Ok(())
    }

    fn dir<T: Real>(&self) -> Vec3<T> {
        Vec3::lift(Vec3::c(self.direction[0], self.direction[1], self.direction[2]))
    }

    pub fn value<T: Real>(&self, r: Vec3<T>, k: T) -> Complex<T> {
        clift::<T>(self.amplitude) * cis(k * self.dir().dot(r))
    }

    /// `∂p_i/∂n = ik (d·n) p_i`.
    pub fn normal_derivative<T: Real>(&self, r: Vec3<T>, n: Vec3<T>, k: T) -> Complex<T> {
        self.value(r, k) * Complex::new(T::zero(), k * self.dir().dot(n))
    }
}

/// Field closure over `(point, normal)` pairs: value and normal derivative.
pub fn incident_plane_wave(
    direction: [f64; 3],
    amplitude: Complex<f64>,
    k: f64,
) -> Result<impl Fn(Vec3<f64>, Vec3<f64>) -> (Complex<f64>, Complex<f64>), BemError> {
    let w = PlaneWave { direction, amplitude };
    w.validate()?;
    Ok(move |r: Vec3<f64>, n: Vec3<f64>| (w.value(r, k), w.normal_derivative(r, n, k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_phase_and_unit_modulus() {
        let a = Complex::new(0.3, -1.2);
        let f = incident_plane_wave([0.6, 0.0, 0.8], a, 3.0).unwrap();
        let n = Vec3::c(0.0, 0.0, 1.0);
        assert_eq!(f(Vec3::c(0.0, 0.0, 0.0), n).0, a);
        for p in [Vec3::c(1.0, 2.0, 3.0), Vec3::c(-0.4, 0.1, 7.0)] {
            assert!((f(p, n).0.norm() - a.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn normal_derivative_matches_fd() {
        let f = incident_plane_wave([0.0, 0.6, 0.8], Complex::new(1.0, 0.5), 4.0).unwrap();
        let r = Vec3::c(0.2, -0.3, 0.7);
        let n = Vec3::c(0.3, 0.4, -0.2).normalized();
        let h = 1e-7;
        let fd = (f(r + n * h, n).0 - f(r - n * h, n).0) / (2.0 * h);
        let an = f(r, n).1;
        assert!((fd - an).norm() < 1e-6 * an.norm());
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(incident_plane_wave([0.0, 0.0, 2.0], Complex::new(1.0, 0.0), 1.0).is_err());
    }
}
