//! Directivity loss, L-BFGS and the shape-optimization loop.
//!
//! One iteration re-deforms the base mesh, re-classifies element pairs with
//! plain arithmetic, solves every frequency (warm-started from the last
//! accepted iterate), evaluates the loss and pulls its cotangent back to the
//! shape parameters with [`crate::shape_diff`].

pub mod demo;
pub mod lbfgs;
pub mod loss;

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bem::{assemble, potential_matrix, BemError, WaveConfig};
use crate::geometry::Vec3;
use crate::mesh::{
    classify_pairs_with_symmetry, deform_with, write_obj, AdjacencyClass, DeformMap, Mesh, MeshError, ShapeBasis,
    DEFAULT_NEAR_FACTOR,
};
use crate::shape_diff::{backward, ForwardState, GradError, GradientDiagnostics, GradientResult};
use crate::solver::{solve_operator, SolveConfig, SolveError};

pub use lbfgs::{minimize, IterInfo, LbfgsError, LbfgsOptions, LbfgsResult, StopReason};
pub use loss::{directivity, loss_and_cotangent, mse_loss, LossError, LossSpec, LossWeights, ObservationLayout, Plane};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Bem(#[from] BemError),
    #[error("forward solve at frequency index {frequency}: {source}")]
    Solve { frequency: usize, source: SolveError },
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("line search failed at iteration {iteration}: {reason}")]
    LineSearch { iteration: usize, reason: String },
    #[error("invalid optimization setup: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scalar objective of the fields at the observation points.
#[derive(Clone, Debug)]
pub enum FieldObjective {
    Directivity { spec: LossSpec, layout: ObservationLayout },
    /// `Σ_f Σ_i (|p_fi| − target_fi)²`.
    Magnitude { points: Vec<Vec3<f64>>, targets: Vec<Vec<f64>> },
}

impl FieldObjective {
    pub fn directivity(spec: LossSpec) -> Result<Self, LossError> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(Self::Directivity { spec, layout })
    }

    pub fn points(&self) -> &[Vec3<f64>] {
        match self {
            Self::Directivity { layout, .. } => &layout.points,
            Self::Magnitude { points, .. } => points,
        }
    }

    /// Loss and conjugate cotangent per frequency and point.
    pub fn evaluate(&self, fields: &[Vec<Complex64>]) -> Result<(f64, Vec<Vec<Complex64>>), LossError> {
        match self {
            Self::Directivity { spec, layout } => loss_and_cotangent(fields, spec, layout),
            Self::Magnitude { targets, points } => {
                if fields.len() != targets.len() || fields.iter().zip(targets).any(|(f, t)| f.len() != t.len() || f.len() != points.len()) {
                    return Err(LossError::Layout("fields do not match the magnitude targets".into()));
                }
                let mut loss = 0.0;
                let cot = fields
                    .iter()
                    .zip(targets)
                    .map(|(f, t)| {
                        f.iter()
                            .zip(t)
                            .map(|(p, t)| {
                                let m = p.norm();
                                loss += (m - t).powi(2);
                                if m == 0.0 {
                                    Complex64::new(0.0, 0.0)
                                } else {
                                    p * (2.0 * (m - t) / m)
                                }
                            })
                            .collect()
                    })
                    .collect();
                Ok((loss, cot))
            }
        }
    }
}

/// A shape-optimization problem over a fixed base mesh.
pub struct Problem {
    pub base: Mesh,
    pub basis: ShapeBasis,
    map: DeformMap,
    pub frequencies: Vec<f64>,
    /// One wave configuration per frequency.
    pub waves: Vec<WaveConfig>,
    pub objective: FieldObjective,
    pub solve: SolveConfig,
    pub near_factor: f64,
    /// Multiplies the loss (and hence the gradient).
    pub scale: f64,
}

/// Per-evaluation switches.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions<'a> {
    pub gradient: bool,
    /// Initial guesses per frequency.
    pub warm: Option<&'a [Vec<Complex64>]>,
    /// Use these pair classes instead of re-classifying the deformed mesh.
    pub classes: Option<&'a AdjacencyClass>,
    /// Re-solve every warm-started system from zero to record the cold count.
    pub compare_cold: bool,
    /// Drop the explicit potential term from the gradient.
    pub without_explicit_term: bool,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    pub fields: Vec<Vec<Complex64>>,
    pub solutions: Vec<Vec<Complex64>>,
    pub gmres_iterations: Vec<usize>,
    pub cold_gmres_iterations: Option<Vec<usize>>,
    pub warm_started: Vec<bool>,
    pub gradient: Option<GradientResult>,
}

struct Forward {
    op: crate::bem::OperatorMatrix,
    x: Vec<Complex64>,
    iterations: usize,
    cold_iterations: Option<usize>,
    warm_started: bool,
    potential: crate::linalg::CMatrix,
    field: Vec<Complex64>,
}

impl Problem {
    /// `template` supplies everything but the wavenumber, which is set from
    /// each frequency as `k = 2πf / c`.
    pub fn new(
        base: Mesh,
        basis: ShapeBasis,
        template: &WaveConfig,
        frequencies: &[f64],
        objective: FieldObjective,
        solve: SolveConfig,
    ) -> Result<Self, OptimError> {
        if frequencies.is_empty() || frequencies.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(OptimError::Config("frequencies must be a non-empty list of positive values".into()));
        }
        if let FieldObjective::Directivity { spec, .. } = &objective {
            if spec.frequencies != frequencies {
                return Err(OptimError::Config("loss frequencies differ from the solve frequencies".into()));
            }
        }
        solve.validate().map_err(|e| OptimError::Solve { frequency: 0, source: e })?;
        let map = basis.vertex_map(&base)?;
        let waves: Vec<WaveConfig> = frequencies
            .iter()
            .map(|f| template.with_k(2.0 * std::f64::consts::PI * f / template.medium.c))
            .collect();
        for w in &waves {
            w.validate(base.num_elements())?;
        }
        Ok(Self {
            base,
            basis,
            map,
            frequencies: frequencies.to_vec(),
            waves,
            objective,
            solve,
            near_factor: DEFAULT_NEAR_FACTOR,
            scale: 1.0,
        })
    }

    pub fn num_params(&self) -> usize {
        self.basis.num_params()
    }

    pub fn deformed(&self, values: &[f64]) -> Result<Mesh, OptimError> {
        if values.len() != self.num_params() {
            return Err(OptimError::Config(format!("{} values for {} parameters", values.len(), self.num_params())));
        }
        Ok(deform_with(&self.base, &self.map, values)?)
    }

    pub fn classify(&self, mesh: &Mesh) -> AdjacencyClass {
        classify_pairs_with_symmetry(mesh, self.near_factor, self.waves[0].symmetry)
    }

    fn forward(&self, mesh: &Mesh, classes: &AdjacencyClass, f: usize, opts: &EvalOptions<'_>) -> Result<Forward, OptimError> {
        let cfg = &self.waves[f];
        let op = assemble(mesh, cfg, classes)?;
        let warm = opts.warm.map(|w| w[f].clone());
        let had_warm = warm.is_some();
        let sol = solve_operator(&op, &self.solve.with_warm_start(warm))
            .map_err(|e| OptimError::Solve { frequency: f, source: e })?;
        let cold_iterations = if opts.compare_cold && had_warm {
            let cold = solve_operator(&op, &self.solve.with_warm_start(None))
                .map_err(|e| OptimError::Solve { frequency: f, source: e })?;
            Some(cold.iterations)
        } else {
            None
        };
        let (potential, offset) = potential_matrix(mesh, cfg, self.objective.points())?;
        let field = potential.matvec(&sol.x).iter().zip(&offset).map(|(a, b)| a + b).collect();
        Ok(Forward {
            op,
            x: sol.x,
            iterations: sol.iterations,
            cold_iterations,
            warm_started: sol.warm_started,
            potential,
            field,
        })
    }

    /// Loss (and optionally its gradient) at control values `values`.
    pub fn evaluate(&self, values: &[f64], opts: &EvalOptions<'_>) -> Result<Evaluation, OptimError> {
        let mesh = self.deformed(values)?;
        let own;
        let classes = match opts.classes {
            Some(c) => c,
            None => {
                own = self.classify(&mesh);
                &own
            }
        };
        let forwards: Vec<Forward> = (0..self.waves.len())
            .into_par_iter()
            .map(|f| self.forward(&mesh, classes, f, opts))
            .collect::<Result<_, _>>()?;
        let fields: Vec<Vec<Complex64>> = forwards.iter().map(|fw| fw.field.clone()).collect();
        let (loss, mut cot) = self.objective.evaluate(&fields)?;
        let loss = loss * self.scale;
        for c in cot.iter_mut().flatten() {
            *c *= self.scale;
        }
        let gradient = if opts.gradient {
            let parts = forwards
                .par_iter()
                .enumerate()
                .map(|(f, fw)| {
                    let state = ForwardState {
                        base: &self.base,
                        map: &self.map,
                        values,
                        classes,
                        cfg: &self.waves[f],
                        op: &fw.op,
                        x: &fw.x,
                        points: self.objective.points(),
                        potential: &fw.potential,
                    };
                    backward(&state, &cot[f], &self.solve)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let p = self.num_params();
            let mut grad = vec![0.0; p];
            let mut solve_term = vec![0.0; p];
            let mut explicit = vec![0.0; p];
            let mut diag = GradientDiagnostics::default();
            for part in &parts {
                for j in 0..p {
                    solve_term[j] += part.solve_term[j];
                    explicit[j] += part.explicit_term[j];
                }
                for (g, v) in grad.iter_mut().zip(part.total(!opts.without_explicit_term)) {
                    *g += v;
                }
                diag.adjoint_residual = diag.adjoint_residual.max(part.adjoint_residual);
                diag.adjoint_iterations += part.adjoint_iterations;
                diag.g_norm += part.g_norm;
            }
            let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            diag.solve_term_norm = l2(&solve_term);
            diag.explicit_term_norm = l2(&explicit);
            Some(GradientResult { grad, diagnostics: diag })
        } else {
            None
        };
        Ok(Evaluation {
            loss,
            fields,
            solutions: forwards.iter().map(|fw| fw.x.clone()).collect(),
            gmres_iterations: forwards.iter().map(|fw| fw.iterations).collect(),
            cold_gmres_iterations: if opts.compare_cold && opts.warm.is_some() {
                Some(forwards.iter().map(|fw| fw.cold_iterations.unwrap_or(fw.iterations)).collect())
            } else {
                None
            },
            warm_started: forwards.iter().map(|fw| fw.warm_started).collect(),
            gradient,
        })
    }

    pub fn loss(&self, values: &[f64], classes: Option<&AdjacencyClass>) -> Result<f64, OptimError> {
        Ok(self.evaluate(values, &EvalOptions { classes, ..EvalOptions::default() })?.loss)
    }

    /// Directivity in dB (per frequency, per layout sample), when the
    /// objective is a directivity loss.
    pub fn directivity_of(&self, fields: &[Vec<Complex64>]) -> Option<Result<Vec<Vec<f64>>, LossError>> {
        match &self.objective {
            FieldObjective::Directivity { layout, .. } => Some(directivity(fields, layout)),
            FieldObjective::Magnitude { .. } => None,
        }
    }
}

/// `frequency,angle,plane,db` rows.
pub fn directivity_csv(frequencies: &[f64], layout: &ObservationLayout, d: &[Vec<f64>]) -> String {
    let mut out = String::from("frequency,angle,plane,db\n");
    for (f, row) in frequencies.iter().zip(d) {
        for (s, v) in layout.samples.iter().zip(row) {
            let _ = writeln!(out, "{f},{},{},{v:.9}", s.theta_deg, s.plane.name());
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct OptimOptions {
    /// Iteration cap `K`.
    pub max_iters: usize,
    pub lbfgs: LbfgsOptions,
    /// Output directory for journal, snapshots and directivity maps.
    pub run_dir: Option<PathBuf>,
    pub warm_start: bool,
    pub compare_cold_start: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub grad_inf: f64,
    pub step: f64,
    pub params: Vec<f64>,
    pub gmres_iterations: Vec<usize>,
    pub cold_gmres_iterations: Option<Vec<usize>>,
    pub warm_started: Vec<bool>,
    pub adjoint_iterations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimHistory {
    pub initial_loss: f64,
    pub initial_grad_inf: f64,
    pub initial_gmres_iterations: Vec<usize>,
    pub records: Vec<IterationRecord>,
    pub stop_reason: String,
    pub final_params: Vec<f64>,
    /// Final mesh path inside the run directory, if one was written.
    pub final_mesh: Option<PathBuf>,
}

impl OptimHistory {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }
}

#[derive(Debug, Error)]
#[error("{error}")]
pub struct OptimFailure {
    #[source]
    pub error: OptimError,
    pub best_params: Option<Vec<f64>>,
    pub best_mesh: Option<Mesh>,
    pub history: Option<OptimHistory>,
}

impl From<OptimError> for OptimFailure {
    fn from(error: OptimError) -> Self {
        Self { error, best_params: None, best_mesh: None, history: None }
    }
}

struct RunDir {
    root: PathBuf,
    journal: fs::File,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self, OptimError> {
        fs::create_dir_all(root.join("snapshots"))?;
        let journal = fs::File::create(root.join("journal.jsonl"))?;
        Ok(Self { root: root.to_path_buf(), journal })
    }

    fn record(&mut self, rec: &IterationRecord) -> Result<(), OptimError> {
        let line = serde_json::to_string(rec).map_err(|e| OptimError::Config(e.to_string()))?;
        writeln!(self.journal, "{line}")?;
        self.journal.flush()?;
        Ok(())
    }

    fn snapshot(&self, iteration: usize, mesh: &Mesh) -> Result<(), OptimError> {
        let text = write_obj(mesh);
        fs::write(self.root.join("snapshots").join(format!("iter_{iteration:03}.obj")), &text)?;
        // write-then-rename keeps best.obj complete if the run is killed
        let tmp = self.root.join("best.obj.tmp");
        fs::write(&tmp, &text)?;
        fs::rename(tmp, self.root.join("best.obj"))?;
        Ok(())
    }

    fn directivity(&self, name: &str, problem: &Problem, fields: &[Vec<Complex64>]) -> Result<(), OptimError> {
        if let (Some(d), FieldObjective::Directivity { layout, .. }) = (problem.directivity_of(fields), &problem.objective) {
            fs::write(self.root.join(name), directivity_csv(&problem.frequencies, layout, &d?))?;
        }
        Ok(())
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Run L-BFGS on `problem` from `init` for at most `opts.max_iters`
/// accepted iterations.
pub fn run_optimization(problem: &Problem, init: &[f64], opts: &OptimOptions) -> Result<(Mesh, OptimHistory), OptimFailure> {
    let start = Instant::now();
    let mut dir = match &opts.run_dir {
        Some(p) => Some(RunDir::create(p)?),
        None => None,
    };
    let init_mesh = problem.deformed(init)?;
    let with_grad = opts.max_iters > 0 && problem.num_params() > 0;
    let first = problem.evaluate(init, &EvalOptions { gradient: with_grad, ..EvalOptions::default() })?;
    let initial_grad_inf = first.gradient.as_ref().map_or(0.0, |g| inf_norm(&g.grad));
    if let Some(d) = &dir {
        d.snapshot(0, &init_mesh)?;
        d.directivity("directivity_initial.csv", problem, &first.fields)?;
    }
    let mut history = OptimHistory {
        initial_loss: first.loss,
        initial_grad_inf,
        initial_gmres_iterations: first.gmres_iterations.clone(),
        records: Vec::new(),
        stop_reason: String::new(),
        final_params: init.to_vec(),
        final_mesh: None,
    };
    let finish = |history: &mut OptimHistory, dir: &Option<RunDir>, mesh: &Mesh, fields: &[Vec<Complex64>]| -> Result<(), OptimError> {
        if let Some(d) = dir {
            let path = d.root.join("final.obj");
            fs::write(&path, write_obj(mesh))?;
            d.directivity("directivity_final.csv", problem, fields)?;
            history.final_mesh = Some(path);
            let json = serde_json::to_string_pretty(&*history).map_err(|e| OptimError::Config(e.to_string()))?;
            fs::write(d.root.join("history.json"), json)?;
        }
        Ok(())
    };
    if !with_grad {
        history.stop_reason = if problem.num_params() == 0 { "no parameters" } else { "iteration cap is zero" }.into();
        finish(&mut history, &dir, &init_mesh, &first.fields)?;
        return Ok((init_mesh, history));
    }

    struct Cached {
        x: Vec<f64>,
        eval: Evaluation,
    }
    let warm: RefCell<Option<Vec<Vec<Complex64>>>> = RefCell::new(opts.warm_start.then(|| first.solutions.clone()));
    let trials: RefCell<Vec<Cached>> = RefCell::new(Vec::new());
    let best: RefCell<(Vec<f64>, Vec<Vec<Complex64>>)> = RefCell::new((init.to_vec(), first.fields.clone()));
    let failure: RefCell<Option<OptimError>> = RefCell::new(None);
    let first_grad = first.gradient.clone().map(|g| g.grad).unwrap_or_default();
    let first_cell = RefCell::new(Some((first.loss, first_grad)));

    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>), OptimError> {
        if let Some((f, g)) = first_cell.borrow_mut().take() {
            return Ok((f, g));
        }
        let w = warm.borrow();
        let eval = match problem.evaluate(
            x,
            &EvalOptions {
                gradient: true,
                warm: w.as_deref(),
                compare_cold: opts.compare_cold_start,
                ..EvalOptions::default()
            },
        ) {
            Ok(e) => e,
            // a trial step that collapses an element is simply too long
            Err(OptimError::Mesh(MeshError::Degenerate { .. })) => {
                return Ok((f64::INFINITY, vec![f64::NAN; x.len()]));
            }
            Err(e) => return Err(e),
        };
        let out = (eval.loss, eval.gradient.as_ref().map(|g| g.grad.clone()).unwrap_or_default());
        trials.borrow_mut().push(Cached { x: x.to_vec(), eval });
        Ok(out)
    };
    let callback = |info: &IterInfo<'_>| -> bool {
        let mut trials = trials.borrow_mut();
        let nearest = trials
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.x.iter().zip(info.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        let Some(i) = nearest else { return false };
        let cached = trials.swap_remove(i);
        trials.clear();
        let eval = cached.eval;
        let rec = IterationRecord {
            iteration: info.iteration,
            loss: info.f,
            grad_inf: inf_norm(info.g),
            step: info.step,
            params: info.x.to_vec(),
            gmres_iterations: eval.gmres_iterations.clone(),
            cold_gmres_iterations: eval.cold_gmres_iterations.clone(),
            warm_started: eval.warm_started.clone(),
            adjoint_iterations: eval.gradient.as_ref().map_or(0, |g| g.diagnostics.adjoint_iterations),
            evaluations: info.evaluations,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        log::info!("iteration {}: loss {:.6e}, |g|inf {:.3e}", rec.iteration, rec.loss, rec.grad_inf);
        if opts.warm_start {
            *warm.borrow_mut() = Some(eval.solutions.clone());
        }
        *best.borrow_mut() = (info.x.to_vec(), eval.fields);
        let written = (|| -> Result<(), OptimError> {
            if let Some(d) = dir.as_mut() {
                d.record(&rec)?;
                d.snapshot(info.iteration, &problem.deformed(info.x)?)?;
            }
            Ok(())
        })();
        history.records.push(rec);
        match written {
            Ok(()) => true,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                false
            }
        }
    };
    let lb = LbfgsOptions {
        max_iters: opts.max_iters,
        lower: problem.basis.lower,
        upper: problem.basis.upper,
        ..opts.lbfgs.clone()
    };
    let result = minimize(objective, init, &lb, callback);
    let (best_x, best_fields) = best.into_inner();
    let best_mesh = problem.deformed(&best_x).ok();
    history.final_params = best_x.clone();
    let err = match (result, failure.into_inner()) {
        (_, Some(e)) => Some(e),
        (Ok(r), None) => {
            history.stop_reason = format!("{:?}", r.reason);
            None
        }
        (Err(LbfgsError::Objective(e)), None) => Some(e),
        (Err(LbfgsError::LineSearch { iteration, reason }), None) => Some(OptimError::LineSearch { iteration, reason }),
        (Err(e), None) => Some(OptimError::Config(e.to_string())),
    };
    let Some(mesh) = best_mesh else {
        return Err(OptimFailure {
            error: err.unwrap_or_else(|| OptimError::Config("best parameters give an invalid mesh".into())),
            best_params: Some(best_x),
            best_mesh: None,
            history: Some(history),
        });
    };
    if let Some(error) = err {
        history.stop_reason = format!("error: {error}");
        let _ = finish(&mut history, &dir, &mesh, &best_fields);
        return Err(OptimFailure { error, best_params: Some(best_x), best_mesh: Some(mesh), history: Some(history) });
    }
    finish(&mut history, &dir, &mesh, &best_fields)?;
    Ok((mesh, history))
}
