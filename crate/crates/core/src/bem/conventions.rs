//! Sign and normalization conventions shared by assembly, potential
//! evaluation, the adjoint pullbacks and the analytic cross-checks.
//!
//! - Time dependence `e^{−iωt}`; outgoing kernel `G = e^{ikd}/(4πd)`.
//! - Element normals point out of the body into the fluid.
//! - Boundary operators for a field point `x` on element `i` and a source
//!   element `Δ_j`:
//!   `S_ij = ∫G`, `K_ij = ∫∂G/∂n_y`, `K'_ij = ∫∂G/∂n_x`,
//!   `H_ij = ∫∂²G/∂n_x∂n_y` (Maue form, see [`super::integrate`]).
//! - Exterior representation: `p(x) = ∫ [p ∂G/∂n_y − G ∂p/∂n] dS_y`, so
//!   the surface equation is `(½ − K) p = −S q` with `q = ∂p/∂n`, and the
//!   normal-derivative equation is `−H p = −(½ + K') q`.
//! - Rigid scattering (`q_total = 0`), unknown = total surface pressure:
//!   `(½ − K) p = p_inc` and `−H p = ∂p_inc/∂n`.
//! - Burton–Miller row = surface row + η · normal-derivative row.
//! - Neumann radiation with normal velocity `v`: `q = iρω v`
//!   (linearized Euler with `e^{−iωt}`).
//!
//! On a flat constant element with centroid collocation, `K_ii = K'_ii = 0`
//! and the jump term is exactly ½.

use num_complex::Complex;

/// Free-term coefficient at a smooth surface point.
pub const JUMP: f64 = 0.5;

/// Default Burton–Miller coupling `η = i/k`.
pub fn default_coupling(k: f64) -> Complex<f64> {
    Complex::new(0.0, 1.0 / k)
}

/// Neumann datum `q = ∂p/∂n` for a normal velocity `v` at angular
/// frequency `ω = k c`.
pub fn neumann_from_velocity(v: Complex<f64>, k: f64, c: f64, rho: f64) -> Complex<f64> {
    Complex::new(0.0, rho * k * c) * v
}
