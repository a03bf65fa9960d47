//! Quadrature on the reference triangle, expressed in barycentric
//! coordinates with weights normalized to sum to one (multiply by the
//! element area to integrate).

use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// 3-point, exact to degree 2.
    GaussLow,
    /// 12-point, exact to degree 6.
    GaussHigh,
    /// `GaussHigh` on each of the 4^levels midpoint sub-triangles.
    SubdividedNear,
    /// Duffy-collapsed tensor Gauss rule on the three sub-triangles meeting
    /// at the centroid; integrates `1/r` singularities at the centroid.
    PolarSingular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn orbit_s21(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        pts.push(p);
        wts.push(w);
    }
}

fn orbit_s111(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        pts.push(p);
        wts.push(w);
    }
}

pub fn gauss_low() -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    orbit_s21(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
    QuadratureRule { points, weights, kind: RuleKind::GaussLow }
}

/// Dunavant's degree-6 rule, digits refined by solving the moment
/// equations in extended precision.
pub fn gauss_high() -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    orbit_s21(0.249_286_745_170_910_42, 0.116_786_275_726_379_37, &mut points, &mut weights);
    orbit_s21(0.063_089_014_491_502_228, 0.050_844_906_370_206_817, &mut points, &mut weights);
    orbit_s111(
        0.053_145_049_844_816_947,
        0.310_352_451_033_784_41,
        0.082_851_075_618_373_575,
        &mut points,
        &mut weights,
    );
    QuadratureRule { points, weights, kind: RuleKind::GaussHigh }
}

/// Apply `base` on each of the `4^levels` sub-triangles of a uniform
/// midpoint refinement.
pub fn subdivided(base: &QuadratureRule, levels: u32) -> QuadratureRule {
    let mut tris: Vec<[[f64; 3]; 3]> = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    let mid = |p: [f64; 3], q: [f64; 3]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])];
    for _ in 0..levels {
        tris = tris
            .into_iter()
            .flat_map(|[a, b, c]| {
                let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
            })
            .collect();
    }
    let scale = 1.0 / tris.len() as f64;
    let mut points = Vec::with_capacity(tris.len() * base.len());
    let mut weights = Vec::with_capacity(tris.len() * base.len());
    for t in &tris {
        for (l, w) in base.iter() {
            let mut p = [0.0; 3];
            for (k, v) in t.iter().enumerate() {
                for d in 0..3 {
                    p[d] += l[k] * v[d];
                }
            }
            points.push(p);
            weights.push(w * scale);
        }
    }
    QuadratureRule { points, weights, kind: RuleKind::SubdividedNear }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { t } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * pn - pnm1) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Duffy rule for a `1/r` singularity at the element centroid.
///
/// The triangle is split into the three sub-triangles (centroid, v_k,
/// v_{k+1}); on each, `(u, v) ↦ c + u (v_k − c) + u v (v_{k+1} − v_k)` has
/// Jacobian `2 A_sub u`, which cancels the singularity.
pub fn polar_singular(order: usize) -> QuadratureRule {
    polar_about([1.0 / 3.0; 3], order)
}

/// Duffy rule collapsing onto an arbitrary interior barycentric point.
pub fn polar_about(c: [f64; 3], order: usize) -> QuadratureRule {
    let (gx, gw) = gauss_legendre(order);
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..3 {
        let (a, b) = (corners[k], corners[(k + 1) % 3]);
        // area fraction of the sub-triangle (c, a, b) is the barycentric
        // coordinate of c opposite to the excluded corner
        let frac = c[(k + 2) % 3];
        if frac <= 0.0 {
            continue;
        }
        for (&u, &wu) in gx.iter().zip(&gw) {
            for (&v, &wv) in gx.iter().zip(&gw) {
                let mut p = [0.0; 3];
                for d in 0..3 {
                    p[d] = c[d] + u * (a[d] - c[d]) + u * v * (b[d] - a[d]);
                }
                points.push(p);
                weights.push(2.0 * frac * u * wu * wv);
            }
        }
    }
    QuadratureRule { points, weights, kind: RuleKind::PolarSingular }
}

/// Composite Gauss–Legendre rule on `[0, 1]` for edge (line) integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct LineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn line_rule(segments: usize, order: usize) -> LineRule {
    let (gx, gw) = gauss_legendre(order);
    let h = 1.0 / segments as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for s in 0..segments {
        for (&x, &w) in gx.iter().zip(&gw) {
            nodes.push((s as f64 + x) * h);
            weights.push(w * h);
        }
    }
    LineRule { nodes, weights }
}

/// Default polar order for self-interactions.
pub const DEFAULT_POLAR_ORDER: usize = 8;

/// The complete set of rules the assembly chooses from.
#[derive(Clone, Debug)]
pub struct RuleSet {
    pub low: QuadratureRule,
    pub high: QuadratureRule,
    pub near_edge: QuadratureRule,
    pub self_polar: QuadratureRule,
    /// Edge rule for the Stokes form of the hypersingular operator.
    pub line: LineRule,
}

impl RuleSet {
    pub fn new(polar_order: usize) -> Self {
        let high = gauss_high();
        Self {
            low: gauss_low(),
            near_edge: subdivided(&high, 1),
            high,
            self_polar: polar_singular(polar_order),
            line: line_rule(4, 6),
        }
    }

    /// Shared default instance.
    pub fn standard() -> &'static RuleSet {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES.get_or_init(|| RuleSet::new(DEFAULT_POLAR_ORDER))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ over the unit-area-normalized triangle of l1^i l2^j l3^k.
    fn exact_moment(i: u32, j: u32, k: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|x| x as f64).product::<f64>();
        2.0 * f(i) * f(j) * f(k) / f(i + j + k + 2)
    }

    fn check_exact(rule: &QuadratureRule, degree: u32) {
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-14, "weights sum {sum}");
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        for i in 0..=degree {
            for j in 0..=degree - i {
                for k in 0..=degree - i - j {
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| w * l[0].powi(i as i32) * l[1].powi(j as i32) * l[2].powi(k as i32))
                        .sum();
                    let e = exact_moment(i, j, k);
                    assert!((q - e).abs() <= 1e-13, "{:?} ({i},{j},{k}): {q} vs {e}", rule.kind);
                }
            }
        }
    }

    #[test]
    fn gauss_rules_are_exact_to_their_degree() {
        check_exact(&gauss_low(), 2);
        check_exact(&gauss_high(), 6);
        check_exact(&subdivided(&gauss_high(), 2), 6);
    }

    #[test]
    fn gauss_low_is_not_degree_three() {
        let r = gauss_low();
        let q: f64 = r.iter().map(|(l, w)| w * l[0].powi(3)).sum();
        assert!((q - exact_moment(3, 0, 0)).abs() > 1e-6);
    }

    #[test]
    fn polar_rule_weights_and_polynomials() {
        let r = polar_singular(8);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // sub-triangle maps are polynomial, so smooth moments are exact too
        check_exact(&r, 6);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 6, 12, 24] {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n as i32 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n {n} degree {p}: {q}");
            }
        }
    }

    /// Closed form of ∫ 1/r over a triangle seen from an interior point:
    /// each sub-triangle with apex at the point contributes
    /// h·[ln(sec φ + tan φ)] between its edge-foot angles.
    fn inverse_distance_oracle(p: [f64; 2], tri: [[f64; 2]; 3]) -> f64 {
        let mut total = 0.0;
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            let t = [e[0] / len, e[1] / len];
            let ap = [a[0] - p[0], a[1] - p[1]];
            let h = (ap[0] * t[1] - ap[1] * t[0]).abs();
            let s_a = ap[0] * t[0] + ap[1] * t[1];
            let s_b = s_a + len;
            let f = |s: f64| (s / h).asinh();
            total += h * (f(s_b) - f(s_a));
        }
        total
    }

    #[test]
    fn polar_rule_matches_analytic_inverse_distance() {
        let tri = [[0.0, 0.0], [1.3, 0.1], [0.4, 0.9]];
        let area = 0.5 * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
            - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]));
        let c = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
        let exact = inverse_distance_oracle(c, tri);
        let mut last = f64::INFINITY;
        for (order, bound) in [(4, 1e-2), (8, 1e-4), (16, 1e-6), (24, 1e-9)] {
            let r = polar_singular(order);
            let q: f64 = r
                .iter()
                .map(|(l, w)| {
                    let x = l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0];
                    let y = l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1];
                    w * area / ((x - c[0]).hypot(y - c[1]))
                })
                .sum();
            let err = (q - exact).abs() / exact;
            assert!(err < bound && err < last, "order {order}: relative error {err:e}");
            last = err;
        }
    }

    #[test]
    fn line_rule_is_composite() {
        let l = line_rule(4, 6);
        assert_eq!(l.nodes.len(), 24);
        assert!((l.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
