//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The line search follows the bracketing/zoom scheme of Nocedal & Wright
//! (Algorithms 3.5 and 3.6) with safeguarded cubic interpolation. Box
//! bounds on the variables cap the trial step so no iterate leaves the box.
//! A non-finite objective at a trial point is treated as "step too long".

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    /// Stop when `‖g‖∞ ≤ gtol`.
    pub gtol: f64,
    /// Stop when the relative loss decrease of an iteration falls below this.
    pub ftol: f64,
    pub max_iters: usize,
    pub max_evals_per_search: usize,
    /// Largest first-iteration step, measured as `‖Δx‖∞`.
    pub initial_step: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            gtol: 1e-8,
            ftol: 0.0,
            max_iters: 100,
            max_evals_per_search: 25,
            initial_step: 1.0,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }
}

#[derive(Debug, Error)]
pub enum LbfgsError<E> {
    #[error(transparent)]
    Objective(E),
    #[error("objective or gradient is not finite at the starting point")]
    NonFiniteStart,
    #[error("line search failed at iteration {iteration}: {reason}")]
    LineSearch { iteration: usize, reason: String },
    #[error("starting point lies outside the bounds")]
    OutOfBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    LossTolerance,
    MaxIterations,
    /// No descent direction remains within the bounds.
    Bounds,
}

/// One accepted iteration, reported to the caller's callback.
#[derive(Clone, Debug)]
pub struct IterInfo<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub f: f64,
    pub g: &'a [f64],
    pub step: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizer of the cubic through `(a, fa, ga)` and `(b, fb, gb)`, kept
/// inside the safeguarded part of the interval.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    let guard = 0.1 * (hi - lo);
    let fallback = 0.5 * (a + b);
    if !fb.is_finite() || !gb.is_finite() {
        // quadratic from f(a), f'(a) alone is not available; bisect
        return fallback;
    }
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if disc < 0.0 {
        return fallback;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    if t.is_finite() && t >= lo + guard && t <= hi - guard {
        t
    } else {
        fallback
    }
}

struct Search<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    g0: f64,
    c1: f64,
    c2: f64,
    evals: usize,
    max_evals: usize,
}

/// `(α, f, g, φ'(α))` at an accepted step.
type Point = (f64, f64, Vec<f64>, f64);

impl<'a, F, E> Search<'a, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    fn eval(&mut self, alpha: f64) -> Result<Point, E> {
        let xt: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + alpha * d).collect();
        let (f, g) = (self.f)(&xt)?;
        self.evals += 1;
        let dg = if f.is_finite() { dot(&g, self.d) } else { f64::NAN };
        Ok((alpha, f, g, dg))
    }

    fn armijo(&self, p: &Point) -> bool {
        p.1.is_finite() && p.1 <= self.f0 + self.c1 * p.0 * self.g0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.3.abs() <= -self.c2 * self.g0
    }

    /// Strong-Wolfe search on `(0, alpha_max]` starting from `alpha0`.
    /// Returns `Ok(None)` when no acceptable point was found.
    fn run(&mut self, alpha0: f64, alpha_max: f64) -> Result<Option<Point>, E> {
        let mut prev: Point = (0.0, self.f0, Vec::new(), self.g0);
        let mut alpha = alpha0.min(alpha_max);
        let mut best: Option<Point> = None;
        for i in 0..self.max_evals {
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || (i > 0 && cur.1 >= prev.1) {
                return self.zoom(prev, cur, best);
            }
            if self.curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.3 >= 0.0 {
                return self.zoom(cur, prev, best);
            }
            best = Some(cur.clone());
            if alpha >= alpha_max {
                // sufficient decrease at the boundary of the box
                return Ok(best);
            }
            prev = cur;
            alpha = (2.0 * alpha).min(alpha_max);
        }
        Ok(best)
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point, mut best: Option<Point>) -> Result<Option<Point>, E> {
        if lo.0 > 0.0 && self.armijo(&lo) {
            best = pick(best, lo.clone());
        }
        while self.evals < self.max_evals {
            let alpha = if hi.1.is_finite() {
                cubic_min(lo.0, lo.1, lo.3, hi.0, hi.1, hi.3)
            } else {
                0.5 * (lo.0 + hi.0)
            };
            if (hi.0 - lo.0).abs() <= 1e-14 * lo.0.abs().max(hi.0.abs()) {
                break;
            }
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || cur.1 >= lo.1 {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(Some(cur));
                }
                best = pick(best, cur.clone());
                if cur.3 * (hi.0 - lo.0) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(best)
    }
}

fn pick(best: Option<Point>, cand: Point) -> Option<Point> {
    match best {
        Some(b) if b.1 <= cand.1 => Some(b),
        _ => Some(cand),
    }
}

/// Largest `α` keeping `x + α d` inside `[lower, upper]`.
fn max_step(x: &[f64], d: &[f64], lower: f64, upper: f64) -> f64 {
    let mut a = f64::INFINITY;
    for (xi, di) in x.iter().zip(d) {
        if *di > 0.0 && upper.is_finite() {
            a = a.min((upper - xi) / di);
        } else if *di < 0.0 && lower.is_finite() {
            a = a.min((lower - xi) / di);
        }
    }
    a.max(0.0)
}

/// Minimize `f` from `x0`. `f` returns the value and gradient; `callback`
/// sees every accepted iterate and may stop the run by returning `false`.
pub fn minimize<F, E, C>(
    mut f: F,
    x0: &[f64],
    opts: &LbfgsOptions,
    mut callback: C,
) -> Result<LbfgsResult, LbfgsError<E>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    C: FnMut(&IterInfo<'_>) -> bool,
{
    if x0.iter().any(|v| *v < opts.lower || *v > opts.upper) {
        return Err(LbfgsError::OutOfBounds);
    }
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x).map_err(LbfgsError::Objective)?;
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(LbfgsError::NonFiniteStart);
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let done = |reason, x, f, g, iterations, evaluations| {
        Ok(LbfgsResult { x, f, g, iterations, evaluations, reason })
    };
    let pinned = |x: f64, g: f64| (x <= opts.lower && g > 0.0) || (x >= opts.upper && g < 0.0);
    let mut retried = false;
    loop {
        let projected: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| if pinned(*xi, *gi) { 0.0 } else { *gi }).collect();
        if inf_norm(&projected) <= opts.gtol {
            let reason = if inf_norm(&g) <= opts.gtol { StopReason::GradientTolerance } else { StopReason::Bounds };
            return done(reason, x, fx, g, iterations, evaluations);
        }
        if iterations >= opts.max_iters {
            return done(StopReason::MaxIterations, x, fx, g, iterations, evaluations);
        }
        // two-loop recursion
        let mut q = projected.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        // no motion through an active bound
        let clip = |d: Vec<f64>| -> Vec<f64> {
            d.into_iter()
                .zip(&x)
                .map(|(di, xi)| if (*xi <= opts.lower && di < 0.0) || (*xi >= opts.upper && di > 0.0) { 0.0 } else { di })
                .collect()
        };
        let mut d = clip(q.iter().map(|v| -v).collect());
        let mut g0 = dot(&g, &d);
        if !(g0 < 0.0) {
            mem.clear();
            d = clip(projected.iter().map(|v| -v).collect());
            g0 = dot(&g, &d);
            if !(g0 < 0.0) {
                return done(StopReason::Bounds, x, fx, g, iterations, evaluations);
            }
        }
        let alpha0 = if mem.is_empty() { (opts.initial_step / inf_norm(&d)).min(1.0) } else { 1.0 };
        let alpha_max = max_step(&x, &d, opts.lower, opts.upper);
        if alpha_max <= 0.0 {
            return done(StopReason::Bounds, x, fx, g, iterations, evaluations);
        }
        let mut search = Search {
            f: &mut f,
            x: &x,
            d: &d,
            f0: fx,
            g0,
            c1: opts.c1,
            c2: opts.c2,
            evals: 0,
            max_evals: opts.max_evals_per_search,
        };
        let found = search.run(alpha0, alpha_max).map_err(LbfgsError::Objective)?;
        evaluations += search.evals;
        let Some((alpha, f_new, g_new, _)) = found else {
            if !mem.is_empty() && !retried {
                // the curvature pairs may be stale; restart from steepest descent
                mem.clear();
                retried = true;
                continue;
            }
            return Err(LbfgsError::LineSearch {
                iteration: iterations + 1,
                reason: format!("no point with sufficient decrease along the search direction (slope {g0:e})"),
            });
        };
        retried = false;
        if !(f_new <= fx) {
            return Err(LbfgsError::LineSearch {
                iteration: iterations + 1,
                reason: "accepted step would increase the loss".into(),
            });
        }
        let x_new: Vec<f64> = x
            .iter()
            .zip(&d)
            .map(|(xi, di)| (xi + alpha * di).clamp(opts.lower, opts.upper))
            .collect();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let f_old = fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
        let keep_going = callback(&IterInfo { iteration: iterations, x: &x, f: fx, g: &g, step: alpha, evaluations });
        if !keep_going {
            return done(StopReason::MaxIterations, x, fx, g, iterations, evaluations);
        }
        if (f_old - fx) <= opts.ftol * f_old.abs() {
            return done(StopReason::LossTolerance, x, fx, g, iterations, evaluations);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn quad(target: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), Infallible> {
        move |x| {
            let f = x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
            Ok((f, x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect()))
        }
    }

    #[test]
    fn quadratic_in_few_iterations() {
        let target = vec![1.0, -2.0, 0.5, 3.0];
        for start in [vec![0.0; 4], vec![10.0, 10.0, -7.0, 1.0]] {
            let r = minimize(quad(target.clone()), &start, &LbfgsOptions::default(), |_| true).unwrap();
            assert!(r.iterations <= 3, "{}", r.iterations);
            assert!(inf_norm(&r.g) < 1e-8);
            for (a, b) in r.x.iter().zip(&target) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    /// Written out independently of the optimizer.
    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>), Infallible> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn rosenbrock_within_sixty_iterations() {
        let opts = LbfgsOptions { gtol: 1e-10, ..LbfgsOptions::default() };
        let mut history = Vec::new();
        let r = minimize(rosenbrock, &[-1.2, 1.0], &opts, |info| {
            history.push(info.f);
            true
        })
        .unwrap();
        assert!(r.f < 1e-8, "f = {}", r.f);
        assert!(r.iterations <= 60, "{} iterations", r.iterations);
        assert!(history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_gradient_means_no_step() {
        let mut calls = 0;
        let r = minimize(
            |_: &[f64]| {
                calls += 1;
                Ok::<_, Infallible>((4.0, vec![0.0, 0.0]))
            },
            &[0.3, 0.7],
            &LbfgsOptions::default(),
            |_| panic!("no iteration expected"),
        )
        .unwrap();
        assert_eq!((r.iterations, r.reason, calls), (0, StopReason::GradientTolerance, 1));
        assert_eq!(r.x, vec![0.3, 0.7]);
    }

    #[test]
    fn bounds_are_respected() {
        let opts = LbfgsOptions { lower: -0.5, upper: 0.5, max_iters: 50, ..LbfgsOptions::default() };
        let r = minimize(quad(vec![2.0, 0.1]), &[0.0, 0.0], &opts, |i| {
            assert!(i.x.iter().all(|v| (-0.5..=0.5).contains(v)));
            true
        })
        .unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-12 && (r.x[1] - 0.1).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn non_finite_trial_points_shrink_the_step() {
        // defined only for x < 1
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>), Infallible> {
            if x[0] >= 1.0 {
                return Ok((f64::INFINITY, vec![f64::NAN]));
            }
            Ok((-x[0] - (1.0 - x[0]).ln() * 0.1, vec![-1.0 + 0.1 / (1.0 - x[0])]))
        };
        let r = minimize(f, &[0.0], &LbfgsOptions { max_iters: 40, ..LbfgsOptions::default() }, |_| true).unwrap();
        assert!((r.x[0] - 0.9).abs() < 1e-6, "{:?}", r.x);
    }
}
