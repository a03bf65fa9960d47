//! Element integrals of the four boundary kernels for one field point.
//!
//! The hypersingular operator uses the Maue identity. With constant
//! `n_x`, `n_y` and `∇²G = −k²G` away from `x`,
//!
//! `∂²G/∂n_x∂n_y = k² (n_x·n_y) G + (n_y × ∇_y)·(n_x × ∇_y G)`,
//!
//! and on a flat element Stokes' theorem turns the second term into a
//! boundary integral. For a constant density on `Δ_j`:
//!
//! `H = k² (n_x·n_y) ∫_Δ G dS − ∮_∂Δ ∇_x G · (t × n_x) dl`,
//!
//! with `t` the unit tangent running counter-clockwise about `n_y`. The
//! area term is at most weakly singular and the line term is smooth unless
//! `x` lies on the edge, so the same form yields the finite-part value for
//! the self element.

use num_complex::Complex;

use super::kernels::{dndn_at, radial};
use super::quadrature::{LineRule, QuadratureRule, RuleSet};
use crate::geometry::{barycentric, Vec3};
use crate::mesh::PairClass;
use crate::scalar::{cis, Real};

/// A (possibly reflected) flat source triangle.
#[derive(Clone, Copy, Debug)]
pub struct Source<T> {
    pub tri: [Vec3<T>; 3],
    pub normal: Vec3<T>,
    pub area: T,
}

impl<T: Real> Source<T> {
    pub fn new(tri: [Vec3<T>; 3]) -> Self {
        let c = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        let twice = c.norm();
        Self { tri, normal: c.scale(twice.recip()), area: twice * T::lift(0.5) }
    }
}

/// Which integrals a caller needs beyond `S` and `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Need {
    pub adjoint: bool,
    pub hyper: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairIntegrals<T> {
    pub s: Complex<T>,
    pub dl: Complex<T>,
    pub adl: Complex<T>,
    pub hyp: Complex<T>,
}

impl<T: Real> Default for PairIntegrals<T> {
    fn default() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self { s: z, dl: z, adl: z, hyp: z }
    }
}

/// Plain quadrature of all kernels; the hypersingular kernel is integrated
/// directly only when `direct_hyper` is set.
pub fn regular<T: Real>(
    x: Vec3<T>,
    nx: Vec3<T>,
    src: &Source<T>,
    k: T,
    rule: &QuadratureRule,
    need: Need,
    direct_hyper: bool,
) -> PairIntegrals<T> {
    let mut out = PairIntegrals::default();
    for (l, w) in rule.iter() {
        let y = barycentric(&src.tri, *l);
        let r = x - y;
        let d = r.norm();
        let inv = d.recip();
        let (g, gp) = radial(d, k);
        let w = T::lift(w);
        out.s += g * w;
        out.dl += gp * (-r.dot(src.normal) * inv * w);
        if need.adjoint {
            out.adl += gp * (r.dot(nx) * inv * w);
        }
        if need.hyper && direct_hyper {
            out.hyp += dndn_at(r, d, nx, src.normal, k) * w;
        }
    }
    out.s = out.s * src.area;
    out.dl = out.dl * src.area;
    out.adl = out.adl * src.area;
    out.hyp = out.hyp * src.area;
    out
}

/// `∮ ∇_x G · (t × n_x) dl` over the element boundary.
pub fn stokes_line<T: Real>(x: Vec3<T>, nx: Vec3<T>, src: &Source<T>, k: T, line: &LineRule) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for e in 0..3 {
        let (a, b) = (src.tri[e], src.tri[(e + 1) % 3]);
        let edge = b - a;
        // (t × n_x) dl = (edge × n_x) dτ
        let tn = edge.cross(nx);
        for (&tau, &w) in line.nodes.iter().zip(&line.weights) {
            let y = a + edge * T::lift(tau);
            let r = x - y;
            let d = r.norm();
            let (_, gp) = radial(d, k);
            acc += gp * (r.dot(tn) / d * T::lift(w));
        }
    }
    acc
}

/// Maue-form hypersingular integral given the already computed `∫G`.
pub fn hyper_maue<T: Real>(
    x: Vec3<T>,
    nx: Vec3<T>,
    src: &Source<T>,
    k: T,
    s: Complex<T>,
    line: &LineRule,
) -> Complex<T> {
    s * (k * k * nx.dot(src.normal)) - stokes_line(x, nx, src, k, line)
}

/// `∫_Δ 1/(4π|x − y|) dS_y` in closed form for `x` in the plane of `Δ`
/// and strictly inside it.
pub fn static_single_layer_inplane<T: Real>(x: Vec3<T>, src: &Source<T>) -> T {
    let mut total = T::zero();
    for e in 0..3 {
        let (a, b) = (src.tri[e], src.tri[(e + 1) % 3]);
        let len = (b - a).norm();
        let u = (b - a).scale(len.recip());
        let sa = (a - x).dot(u);
        let h = (a - u * sa - x).norm();
        total += h * ((sa + len) / h).asinh() - h * (sa / h).asinh();
    }
    total * T::lift(0.25 * std::f64::consts::FRAC_1_PI)
}

/// Self-element single layer: static part exact, `(e^{ikr} − 1)/(4πr)`
/// by the polar rule.
fn self_single_layer<T: Real>(x: Vec3<T>, src: &Source<T>, k: T, rule: &QuadratureRule) -> Complex<T> {
    let quarter_pi = T::lift(0.25 * std::f64::consts::FRAC_1_PI);
    let one = Complex::new(T::one(), T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (l, w) in rule.iter() {
        let r = (x - barycentric(&src.tri, *l)).norm();
        acc += (cis(k * r) - one) * (quarter_pi / r * T::lift(w));
    }
    acc * src.area + static_single_layer_inplane(x, src)
}

/// Integrals for a classified collocation/source pair.
pub fn pair<T: Real>(
    x: Vec3<T>,
    nx: Vec3<T>,
    src: &Source<T>,
    k: T,
    class: PairClass,
    rules: &RuleSet,
    far_rule: &QuadratureRule,
    need: Need,
) -> PairIntegrals<T> {
    let rule = match class {
        PairClass::RegularFar => return regular(x, nx, src, k, far_rule, need, true),
        PairClass::SelfPair => &rules.self_polar,
        PairClass::SharedEdge => &rules.near_edge,
        PairClass::SharedVertex | PairClass::RegularNear => &rules.high,
    };
    let mut out = if class == PairClass::SelfPair {
        // flat element with x in its plane: both double layers vanish
        PairIntegrals { s: self_single_layer(x, src, k, rule), ..PairIntegrals::default() }
    } else {
        regular(x, nx, src, k, rule, need, false)
    };
    if need.hyper {
        out.hyp = hyper_maue(x, nx, src, k, out.s, &rules.line);
    }
    out
}
