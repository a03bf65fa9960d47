//! Directivity targets and the dB mean-squared-error loss.
//!
//! Observation points sit on three arcs of radius `radius` in the planes
//! through the +z axis at azimuth 0° (horizontal, the x–z plane), 90°
//! (vertical, the y–z plane) and 45° (diagonal), sampled every `step_deg`
//! from 0° to `span_deg`. The on-axis point is stored once, at index 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// `20 / ln 10`: dB per neper of amplitude.
const DB_PER_NEPER: f64 = 8.685889638065035;

/// Smallest on-axis magnitude accepted for normalization (Pa).
pub const MIN_ON_AXIS: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("on-axis pressure {magnitude:e} Pa at frequency index {frequency} is too small to normalize")]
    Normalization { frequency: usize, magnitude: f64 },
    #[error("pressure at observation {point} (frequency index {frequency}) is zero; its level is -inf dB")]
    ZeroPressure { frequency: usize, point: usize },
    #[error("field layout mismatch: {0}")]
    Layout(String),
    #[error("invalid loss configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Horizontal,
    Vertical,
    Diagonal,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Horizontal, Plane::Vertical, Plane::Diagonal];

    pub fn azimuth_deg(self) -> f64 {
        match self {
            Plane::Horizontal => 0.0,
            Plane::Vertical => 90.0,
            Plane::Diagonal => 45.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Horizontal => "horizontal",
            Plane::Vertical => "vertical",
            Plane::Diagonal => "diagonal",
        }
    }
}

/// Relative weights of the five loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub horizontal_in: f64,
    pub horizontal_out: f64,
    pub vertical_in: f64,
    pub vertical_out: f64,
    pub diagonal_out: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { horizontal_in: 1.0, horizontal_out: 1.0, vertical_in: 1.0, vertical_out: 1.0, diagonal_out: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSpec {
    /// Horizontal coverage half-angle (degrees).
    pub coverage_h: f64,
    /// Vertical coverage half-angle (degrees).
    pub coverage_v: f64,
    /// Target level inside coverage (dB re on-axis).
    pub t_in: f64,
    /// Target level outside coverage (dB re on-axis).
    pub t_out: f64,
    /// Frequencies (Hz).
    pub frequencies: Vec<f64>,
    pub radius: f64,
    pub step_deg: f64,
    pub span_deg: f64,
    pub weights: LossWeights,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            coverage_h: 35.0,
            coverage_v: 25.0,
            t_in: -3.0,
            t_out: -10.0,
            frequencies: Vec::new(),
            radius: 10.0,
            step_deg: 1.0,
            span_deg: 90.0,
            weights: LossWeights::default(),
        }
    }
}

/// One sample of an arc: which point it reads and at what polar angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub plane: Plane,
    pub theta_deg: f64,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationLayout {
    pub points: Vec<Vec3<f64>>,
    /// Every arc sample, the on-axis point included once per plane.
    pub samples: Vec<Sample>,
}

impl ObservationLayout {
    pub fn on_axis(&self) -> usize {
        0
    }
}

impl LossSpec {
    pub fn with_frequencies(mut self, frequencies: Vec<f64>) -> Self {
        self.frequencies = frequencies;
        self
    }

    /// Coverage half-angle used for a plane; the diagonal takes the mean of
    /// the horizontal and vertical values.
    pub fn coverage(&self, plane: Plane) -> f64 {
        match plane {
            Plane::Horizontal => self.coverage_h,
            Plane::Vertical => self.coverage_v,
            Plane::Diagonal => 0.5 * (self.coverage_h + self.coverage_v),
        }
    }

    pub fn num_angles(&self) -> usize {
        (self.span_deg / self.step_deg).round() as usize + 1
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |m: String| Err(LossError::Config(m));
        for (name, c) in [("coverage_h", self.coverage_h), ("coverage_v", self.coverage_v)] {
            if !(c > 0.0 && c < 90.0) {
                return bad(format!("{name} must lie in (0, 90) degrees, got {c}"));
            }
        }
        if !(self.t_out < self.t_in && self.t_in <= 0.0) {
            return bad(format!("targets must satisfy t_out < t_in <= 0 (got {} and {})", self.t_out, self.t_in));
        }
        if self.frequencies.is_empty() {
            return bad("frequency list is empty".into());
        }
        if let Some(f) = self.frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return bad(format!("frequencies must be positive, got {f}"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("arc radius must be positive, got {}", self.radius));
        }
        if !(self.step_deg > 0.0 && self.span_deg > 0.0 && self.span_deg <= 180.0) {
            return bad("arc step and span must be positive, span at most 180 degrees".into());
        }
        let steps = self.span_deg / self.step_deg;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad("arc span must be a whole number of steps".into());
        }
        let w = &self.weights;
        if [w.horizontal_in, w.horizontal_out, w.vertical_in, w.vertical_out, w.diagonal_out]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return bad("loss weights must be finite and non-negative".into());
        }
        for plane in Plane::ALL {
            let (n_in, n_out) = self.region_sizes(plane);
            if plane != Plane::Diagonal && n_in == 0 {
                return bad(format!("{} coverage region is empty", plane.name()));
            }
            if n_out == 0 {
                return bad(format!("{} out-of-coverage region is empty", plane.name()));
            }
        }
        Ok(())
    }

    fn angle(&self, i: usize) -> f64 {
        self.step_deg * i as f64
    }

    fn region_sizes(&self, plane: Plane) -> (usize, usize) {
        let c = self.coverage(plane);
        let n_in = (0..self.num_angles()).filter(|&i| self.angle(i) <= c).count();
        (n_in, self.num_angles() - n_in)
    }

    pub fn layout(&self) -> ObservationLayout {
        let mut points = vec![Vec3::c(0.0, 0.0, self.radius)];
        let mut samples = Vec::new();
        for plane in Plane::ALL {
            let (sp, cp) = plane.azimuth_deg().to_radians().sin_cos();
            for i in 0..self.num_angles() {
                let theta = self.angle(i);
                let index = if i == 0 {
                    0
                } else {
                    let (st, ct) = theta.to_radians().sin_cos();
                    points.push(Vec3::c(self.radius * st * cp, self.radius * st * sp, self.radius * ct));
                    points.len() - 1
                };
                samples.push(Sample { plane, theta_deg: theta, index });
            }
        }
        ObservationLayout { points, samples }
    }

    /// Which term a sample belongs to: `(weight, target, region size)`, or
    /// `None` for diagonal samples inside coverage.
    fn term(&self, s: &Sample) -> Option<(f64, f64, usize)> {
        let inside = s.theta_deg <= self.coverage(s.plane);
        let (n_in, n_out) = self.region_sizes(s.plane);
        let w = &self.weights;
        match (s.plane, inside) {
            (Plane::Horizontal, true) => Some((w.horizontal_in, self.t_in, n_in)),
            (Plane::Horizontal, false) => Some((w.horizontal_out, self.t_out, n_out)),
            (Plane::Vertical, true) => Some((w.vertical_in, self.t_in, n_in)),
            (Plane::Vertical, false) => Some((w.vertical_out, self.t_out, n_out)),
            (Plane::Diagonal, true) => None,
            (Plane::Diagonal, false) => Some((w.diagonal_out, self.t_out, n_out)),
        }
    }
}

fn check_fields(fields: &[Vec<Complex64>], spec: &LossSpec, layout: &ObservationLayout) -> Result<(), LossError> {
    if fields.len() != spec.frequencies.len() {
        return Err(LossError::Layout(format!("{} field sets for {} frequencies", fields.len(), spec.frequencies.len())));
    }
    if let Some(f) = fields.iter().find(|f| f.len() != layout.points.len()) {
        return Err(LossError::Layout(format!("{} values for {} observation points", f.len(), layout.points.len())));
    }
    Ok(())
}

/// `D[f][sample] = 20 log10(|p| / |p_on-axis|)`.
pub fn directivity(fields: &[Vec<Complex64>], layout: &ObservationLayout) -> Result<Vec<Vec<f64>>, LossError> {
    fields
        .iter()
        .enumerate()
        .map(|(fi, p)| {
            let p0 = p[layout.on_axis()].norm();
            if !(p0 > MIN_ON_AXIS) {
                return Err(LossError::Normalization { frequency: fi, magnitude: p0 });
            }
            layout
                .samples
                .iter()
                .map(|s| {
                    let m = p[s.index].norm();
                    if m == 0.0 {
                        return Err(LossError::ZeroPressure { frequency: fi, point: s.index });
                    }
                    Ok(20.0 * (m / p0).log10())
                })
                .collect()
        })
        .collect()
}

/// Weighted MSE of the directivity against the targets; the five region
/// terms are added.
pub fn mse_loss(d: &[Vec<f64>], spec: &LossSpec, layout: &ObservationLayout) -> f64 {
    let nf = d.len() as f64;
    let mut total = 0.0;
    for row in d {
        for (s, &v) in layout.samples.iter().zip(row) {
            if let Some((w, t, n)) = spec.term(s) {
                total += w * (v - t).powi(2) / (n as f64 * nf);
            }
        }
    }
    total
}

/// Loss and its conjugate cotangent with respect to every field value.
///
/// With `D = (20/ln 10)(ln|p| − ln|p₀|)`, `∂ln|p|/∂Re p + i ∂ln|p|/∂Im p =
/// p/|p|²`, so each sample adds `a·(20/ln 10)·p/|p|²` at its point and the
/// opposite at the on-axis point, where `a = ∂L/∂D`.
pub fn loss_and_cotangent(
    fields: &[Vec<Complex64>],
    spec: &LossSpec,
    layout: &ObservationLayout,
) -> Result<(f64, Vec<Vec<Complex64>>), LossError> {
    check_fields(fields, spec, layout)?;
    let d = directivity(fields, layout)?;
    let loss = mse_loss(&d, spec, layout);
    let nf = fields.len() as f64;
    let cot = fields
        .iter()
        .zip(&d)
        .map(|(p, drow)| {
            let mut c = vec![Complex64::new(0.0, 0.0); p.len()];
            let p0 = p[layout.on_axis()];
            let dp0 = p0 / p0.norm_sqr();
            for (s, &v) in layout.samples.iter().zip(drow) {
                let Some((w, t, n)) = spec.term(s) else { continue };
                let a = 2.0 * w * (v - t) / (n as f64 * nf) * DB_PER_NEPER;
                if a == 0.0 {
                    continue;
                }
                let q = p[s.index];
                c[s.index] += q / q.norm_sqr() * a;
                c[layout.on_axis()] -= dp0 * a;
            }
            c
        })
        .collect();
    Ok((loss, cot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> LossSpec {
        LossSpec::default().with_frequencies(vec![1000.0])
    }

    /// Fields whose levels are exactly on target everywhere.
    fn on_target(spec: &LossSpec, layout: &ObservationLayout, phase: f64) -> Vec<Complex64> {
        let mut p = vec![Complex64::new(0.0, 0.0); layout.points.len()];
        p[0] = Complex64::from_polar(2.0, phase);
        for s in &layout.samples {
            if s.index == 0 {
                continue;
            }
            let db = if s.theta_deg <= spec.coverage(s.plane) { spec.t_in } else { spec.t_out };
            p[s.index] = Complex64::from_polar(2.0 * 10f64.powf(db / 20.0), phase + 0.1 * s.index as f64);
        }
        p
    }

    #[test]
    fn layout_has_271_points_and_shared_axis() {
        let s = spec();
        let l = s.layout();
        assert_eq!(l.points.len(), 271);
        assert_eq!(l.samples.len(), 273);
        assert_eq!(l.samples.iter().filter(|x| x.index == 0).count(), 3);
        for p in &l.points {
            assert!((p.norm() - 10.0).abs() < 1e-12);
        }
        let h90 = l.samples.iter().find(|x| x.plane == Plane::Horizontal && x.theta_deg == 90.0).unwrap();
        assert!((l.points[h90.index] - Vec3::c(10.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(s.region_sizes(Plane::Horizontal), (36, 55));
        assert_eq!(s.region_sizes(Plane::Vertical), (26, 65));
    }

    #[test]
    fn directivity_identities() {
        let s = spec();
        let l = s.layout();
        let mut p = vec![Complex64::new(1.0, 1.0); l.points.len()];
        p[5] = Complex64::new(0.5, 0.5);
        let d = directivity(&[p.clone()], &l).unwrap();
        for (smp, v) in l.samples.iter().zip(&d[0]) {
            if smp.index == 0 {
                assert_eq!(*v, 0.0);
            }
            if smp.index == 5 {
                assert!((v + 6.020599913279624).abs() < 1e-12);
            }
        }
        // global complex scaling cancels
        let c = Complex64::new(-3.0, 7.0);
        let scaled: Vec<_> = p.iter().map(|z| z * c).collect();
        let d2 = directivity(&[scaled], &l).unwrap();
        for (a, b) in d[0].iter().zip(&d2[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_on_axis_is_rejected() {
        let s = spec();
        let l = s.layout();
        let mut p = vec![Complex64::new(1.0, 0.0); l.points.len()];
        p[0] = Complex64::new(0.0, 0.0);
        assert!(matches!(directivity(&[p], &l), Err(LossError::Normalization { .. })));
    }

    #[test]
    fn exact_targets_give_zero_loss_and_cotangent_except_axis_term() {
        let s = spec();
        let l = s.layout();
        let p = on_target(&s, &l, 0.3);
        let (loss, cot) = loss_and_cotangent(&[p], &s, &l).unwrap();
        // θ = 0 sits in both coverage regions at 0 dB, a fixed 9/36 + 9/26
        let floor = 9.0 / 36.0 + 9.0 / 26.0;
        assert!((loss - floor).abs() < 1e-12, "{loss}");
        for c in &cot[0] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn single_off_target_sample() {
        let s = spec();
        let l = s.layout();
        let mut p = on_target(&s, &l, 0.0);
        let h10 = l.samples.iter().find(|x| x.plane == Plane::Horizontal && x.theta_deg == 10.0).unwrap().index;
        p[h10] *= 10f64.powf(2.0 / 20.0);
        let base = 9.0 / 36.0 + 9.0 / 26.0;
        let (loss, cot) = loss_and_cotangent(&[p], &s, &l).unwrap();
        assert!((loss - base - 4.0 / 36.0).abs() < 1e-12);
        for (i, c) in cot[0].iter().enumerate() {
            if i != h10 && i != 0 {
                assert!(c.norm() < 1e-12, "{i}");
            }
        }
        assert!(cot[0][h10].norm() > 0.0 && cot[0][0].norm() > 0.0);
    }

    #[test]
    fn cotangent_matches_finite_differences() {
        let s = LossSpec::default().with_frequencies(vec![500.0, 900.0]);
        let l = s.layout();
        let fields: Vec<Vec<Complex64>> = (0..2)
            .map(|f| {
                (0..l.points.len())
                    .map(|i| {
                        let t = (i * 7 + f * 3) as f64;
                        Complex64::new(0.3 + (0.37 * t).sin().abs(), (0.11 * t).cos())
                    })
                    .collect()
            })
            .collect();
        let (_, cot) = loss_and_cotangent(&fields, &s, &l).unwrap();
        let f = |fl: &Vec<Vec<Complex64>>| loss_and_cotangent(fl, &s, &l).unwrap().0;
        for (fi, i) in [(0, 0), (0, 3), (1, 40), (1, 150), (0, 250), (1, 0)] {
            let scale = fields[fi][i].norm();
            let h = 1e-6 * scale;
            for (dir, part) in [(Complex64::new(1.0, 0.0), 0), (Complex64::new(0.0, 1.0), 1)] {
                let mut a = fields.clone();
                let mut b = fields.clone();
                a[fi][i] += dir * h;
                b[fi][i] -= dir * h;
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                let an = if part == 0 { cot[fi][i].re } else { cot[fi][i].im };
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "({fi},{i},{part}) fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn permuting_angles_within_a_region_keeps_the_loss() {
        let s = spec();
        let l = s.layout();
        let p: Vec<_> = (0..l.points.len()).map(|i| Complex64::new(1.0 + 0.01 * i as f64, 0.2)).collect();
        let mut q = p.clone();
        let idx = |plane, th: f64| l.samples.iter().find(|x| x.plane == plane && x.theta_deg == th).unwrap().index;
        q.swap(idx(Plane::Horizontal, 5.0), idx(Plane::Horizontal, 30.0));
        q.swap(idx(Plane::Vertical, 40.0), idx(Plane::Vertical, 88.0));
        let a = loss_and_cotangent(&[p], &s, &l).unwrap().0;
        let b = loss_and_cotangent(&[q], &s, &l).unwrap().0;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn validation() {
        assert!(spec().validate().is_ok());
        assert!(LossSpec::default().validate().is_err());
        let mut s = spec();
        s.t_in = -12.0;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.coverage_h = 95.0;
        assert!(s.validate().is_err());
    }
}
