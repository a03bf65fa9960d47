//! One function per subcommand. Each writes its files under `out` and
//! returns a report; threshold breaches are listed in the report and
//! turned into exit code 2 by the caller.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use diffbem::analytic::{mie_scattered, MieConfig};
use diffbem::bem::{
    assemble, evaluate_potential, read_points_csv, write_field_csv, write_vtk_structured_points, Formulation, GridSpec,
    PlaneWave, WaveConfig,
};
use diffbem::geometry::fibonacci_sphere;
use diffbem::mesh::{
    classify_pairs, classify_pairs_with_symmetry, deform, make_icosphere, make_octasphere, ShapeParams, DEFAULT_NEAR_FACTOR,
};
use diffbem::optimize::{
    run_optimization, EvalOptions, FieldObjective, LbfgsOptions, OptimError, OptimOptions, Problem,
};
use diffbem::shape_diff::fd_gradient;
use diffbem::solver::solve_operator;
use diffbem::{Complex64, Vec3d};
use serde::Serialize;
use serde_json::json;

use crate::config::{section, MeshSpec, RunConfig};
use crate::CliError;

fn numerical(e: impl Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn config_err(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

fn optim_err(e: OptimError) -> CliError {
    match e {
        OptimError::Config(m) => CliError::Config(m),
        OptimError::Io(e) => CliError::Io(e),
        e => numerical(e),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(numerical)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn to_arrays(points: &[Vec3d]) -> Vec<[f64; 3]> {
    points.iter().map(|p| p.to_array()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereRow {
    pub n: usize,
    pub k: f64,
    pub mean_abs_error: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SphereReport {
    pub rows: Vec<SphereRow>,
    pub failures: Vec<String>,
}

impl SphereReport {
    pub fn error(&self, n: usize, k: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n && r.k == k).map(|r| r.mean_abs_error)
    }
}

/// Rigid scattering of a unit plane wave along +z by a sphere, compared with
/// the Mie series on a Fibonacci lattice. `validate_sphere.csv` holds the
/// deterministic columns; wall times go to `timings.csv`.
pub fn validate_sphere(cfg: &RunConfig, out: &Path) -> Result<SphereReport, CliError> {
    let spec = section(&cfg.validate_sphere, "validate_sphere")?;
    if spec.k.is_empty() {
        return Err(CliError::Config("[validate_sphere] k list is empty".into()));
    }
    if spec.subdivisions.is_empty() {
        return Err(CliError::Config("[validate_sphere] subdivisions list is empty".into()));
    }
    if spec.k.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(CliError::Config("[validate_sphere] wavenumbers must be positive".into()));
    }
    if !spec.max_error.is_empty() && spec.max_error.len() != spec.subdivisions.len() {
        return Err(CliError::Config("[validate_sphere] max_error needs one entry per subdivision level".into()));
    }
    if !(spec.radius > 0.0 && spec.eval_radius > spec.radius) || spec.eval_points == 0 {
        return Err(CliError::Config("[validate_sphere] need 0 < radius < eval_radius and eval_points > 0".into()));
    }
    cfg.solver.validate().map_err(config_err)?;

    let points = fibonacci_sphere(spec.eval_points, spec.eval_radius);
    let arrays = to_arrays(&points);
    let mut report = SphereReport::default();
    for &s in &spec.subdivisions {
        let mesh = if spec.octasphere { make_octasphere(s, spec.radius) } else { make_icosphere(s, spec.radius) }
            .map_err(config_err)?;
        let classes = classify_pairs(&mesh, DEFAULT_NEAR_FACTOR);
        for &k in &spec.k {
            let start = Instant::now();
            let mut wave = WaveConfig::rigid(k, spec.formulation, PlaneWave::along_z(Complex64::new(1.0, 0.0)));
            if spec.formulation == Formulation::Chief {
                let r = spec.radius;
                wave = wave.with_chief_points(vec![Vec3d::c(0.31 * r, 0.17 * r, 0.23 * r), Vec3d::c(-0.22 * r, 0.12 * r, -0.37 * r)]);
            }
            let op = assemble(&mesh, &wave, &classes).map_err(numerical)?;
            let sol = solve_operator(&op, &cfg.solver).map_err(numerical)?;
            let bem = evaluate_potential(&mesh, &wave, &sol.x, &points).map_err(numerical)?;
            let mie_cfg = MieConfig { a: spec.radius, ..MieConfig::unit_sphere(k) };
            let mie = mie_scattered(&mie_cfg, &arrays).map_err(numerical)?;
            let err = bem.iter().zip(&mie).map(|(a, b)| (a - b).norm()).sum::<f64>() / points.len() as f64;
            let row = SphereRow {
                n: mesh.num_elements(),
                k,
                mean_abs_error: err,
                iterations: sol.iterations,
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            println!("N={:<6} k={:<8} error={:.4e} iterations={:<4} time={:.2}s", row.n, k, err, row.iterations, row.wall_time_s);
            report.rows.push(row);
        }
    }

    let nk = spec.k.len();
    for (i, row) in report.rows.iter().enumerate() {
        if !row.mean_abs_error.is_finite() {
            report.failures.push(format!("N={} k={}: error is not finite", row.n, row.k));
        } else if let Some(max) = spec.max_error.get(i / nk) {
            if row.mean_abs_error > *max {
                report.failures.push(format!("N={} k={}: error {:.3e} above {max:.3e}", row.n, row.k, row.mean_abs_error));
            }
        }
    }
    if spec.require_decreasing {
        for j in 0..nk {
            let col: Vec<&SphereRow> = report.rows.iter().skip(j).step_by(nk).collect();
            for w in col.windows(2) {
                if !(w[1].mean_abs_error < w[0].mean_abs_error) {
                    report.failures.push(format!(
                        "k={}: error does not decrease from N={} to N={} ({:.3e} -> {:.3e})",
                        w[0].k, w[0].n, w[1].n, w[0].mean_abs_error, w[1].mean_abs_error
                    ));
                }
            }
        }
    }
    if spec.require_k_trend && nk > 1 {
        for level in report.rows.chunks(nk) {
            let lo = level.iter().min_by(|a, b| a.k.total_cmp(&b.k)).unwrap();
            let hi = level.iter().max_by(|a, b| a.k.total_cmp(&b.k)).unwrap();
            if !(hi.mean_abs_error > lo.mean_abs_error) {
                report.failures.push(format!(
                    "N={}: error at k={} ({:.3e}) does not exceed error at k={} ({:.3e})",
                    lo.n, hi.k, hi.mean_abs_error, lo.k, lo.mean_abs_error
                ));
            }
        }
    }

    let mut csv = String::from("n,k,mean_abs_error,solve_iters\n");
    let mut timings = String::from("n,k,wall_time_s\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{},{:.12e},{}", r.n, r.k, r.mean_abs_error, r.iterations);
        let _ = writeln!(timings, "{},{},{:.3}", r.n, r.k, r.wall_time_s);
    }
    fs::write(out.join("validate_sphere.csv"), csv)?;
    fs::write(out.join("timings.csv"), timings)?;
    Ok(report)
}

/// Build the optimization problem and initial control values described by
/// `[mesh]`, `[shape]`, `[wave]`, `[loss]` and `[solver]`.
pub fn build_problem(cfg: &RunConfig) -> Result<(Problem, Vec<f64>), CliError> {
    let mesh_spec = section(&cfg.mesh, "mesh")?;
    let mesh = mesh_spec.build()?;
    let basis = match &cfg.shape {
        Some(s) => s.basis(mesh_spec.default_basis())?,
        None => mesh_spec
            .default_basis()
            .ok_or_else(|| CliError::Config("[shape] section required for this mesh".into()))?,
    };
    let values = match cfg.shape.as_ref().map(|s| s.values.clone()) {
        Some(v) if !v.is_empty() => v,
        _ => vec![0.0; basis.num_params()],
    };
    let init = ShapeParams::new(values, basis.clone()).map_err(config_err)?.values;
    let loss = section(&cfg.loss, "loss")?.clone();
    let template = match (&cfg.wave, mesh_spec) {
        (Some(w), _) => w.template(&mesh)?,
        (None, MeshSpec::ConeRadiator(c)) => c.wave_template(&mesh),
        (None, _) => return Err(CliError::Config("[wave] section required for this mesh".into())),
    };
    let freqs = loss.frequencies.clone();
    let objective = FieldObjective::directivity(loss).map_err(config_err)?;
    let problem = Problem::new(mesh, basis, &template, &freqs, objective, cfg.solver.clone()).map_err(|e| match e {
        OptimError::Solve { source, .. } => config_err(source),
        OptimError::Bem(e) => config_err(e),
        OptimError::Mesh(e) => config_err(e),
        e => optim_err(e),
    })?;
    Ok((problem, init))
}

pub const GRAD_CHECK_MAX_ELEMENTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradRow {
    pub index: usize,
    pub adjoint: f64,
    pub fd: f64,
    pub rel_error: f64,
    /// Above the noise floor, so held to the relative tolerance.
    pub checked: bool,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub n_elements: usize,
    pub rows: Vec<GradRow>,
    pub max_rel_error: f64,
    pub failures: Vec<String>,
}

/// Adjoint gradient against central differences with step `h`, written to
/// `grad_check.csv`.
pub fn grad_check(cfg: &RunConfig, out: &Path) -> Result<GradCheckReport, CliError> {
    let spec = section(&cfg.grad_check, "grad_check")?;
    if !(spec.h > 0.0 && spec.h.is_finite()) {
        return Err(CliError::Config(format!("[grad_check] h must be positive, got {}", spec.h)));
    }
    let (problem, init) = build_problem(cfg)?;
    let n = problem.base.num_elements();
    if n > GRAD_CHECK_MAX_ELEMENTS {
        return Err(CliError::Config(format!(
            "grad-check needs at most {GRAD_CHECK_MAX_ELEMENTS} elements; the mesh has {n}"
        )));
    }
    let mut report = GradCheckReport { n_elements: n, ..GradCheckReport::default() };
    if problem.num_params() > 0 {
        let mesh = problem.deformed(&init).map_err(optim_err)?;
        let frozen = spec.freeze_classes.then(|| problem.classify(&mesh));
        let eval = problem
            .evaluate(&init, &EvalOptions { gradient: true, classes: frozen.as_ref(), ..EvalOptions::default() })
            .map_err(optim_err)?;
        let adjoint = eval.gradient.map(|g| g.grad).unwrap_or_default();
        let fd = fd_gradient(|x: &[f64]| problem.loss(x, frozen.as_ref()), &init, spec.h).map_err(optim_err)?;
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, (&a, &f)) in adjoint.iter().zip(&fd).enumerate() {
            let checked = f.abs() >= spec.noise_floor * scale && f != 0.0;
            let rel = if f != 0.0 { (a - f).abs() / f.abs() } else { (a - f).abs() };
            if checked {
                report.max_rel_error = report.max_rel_error.max(rel);
                if !(rel < spec.tolerance) {
                    report.failures.push(format!("component {i}: relative error {rel:.3e} above {:.1e}", spec.tolerance));
                }
            } else if !((a - f).abs() <= spec.floor_tolerance * scale) {
                report.failures.push(format!("component {i}: below-floor mismatch {:.3e}", (a - f).abs()));
            }
            report.rows.push(GradRow { index: i, adjoint: a, fd: f, rel_error: rel, checked });
        }
        println!("loss {:.10e}, max relative error {:.3e} over {} components", eval.loss, report.max_rel_error, fd.len());
    } else {
        println!("no shape parameters; nothing to check");
    }
    let mut csv = String::from("index,adjoint,fd,rel_error,checked\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{:.12e},{:.12e},{:.6e},{}", r.index, r.adjoint, r.fd, r.rel_error, r.checked);
    }
    fs::write(out.join("grad_check.csv"), csv)?;
    Ok(report)
}

/// Evaluation points from `[output]`, plus the grid when they came from one.
pub fn output_points(cfg: &RunConfig) -> Result<(Vec<Vec3d>, Option<GridSpec>), CliError> {
    let o = section(&cfg.output, "output")?;
    if let Some(path) = &o.points_csv {
        let text = fs::read_to_string(path)?;
        return Ok((read_points_csv(&text).map_err(config_err)?, None));
    }
    if let Some(grid) = &o.grid {
        if grid.is_empty() || grid.spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(CliError::Config("[output.grid] needs positive counts and spacings".into()));
        }
        return Ok((grid.points(), Some(*grid)));
    }
    if let Some(s) = &o.sphere {
        if !(s.radius > 0.0) || s.count == 0 {
            return Err(CliError::Config("[output.sphere] needs a positive radius and count".into()));
        }
        return Ok((fibonacci_sphere(s.count, s.radius), None));
    }
    Err(CliError::Config("[output] needs one of points_csv, grid or sphere".into()))
}

fn write_fields(out: &Path, stem: &str, points: &[Vec3d], grid: Option<&GridSpec>, values: &[Complex64]) -> Result<Vec<PathBuf>, CliError> {
    let csv = out.join(format!("{stem}.csv"));
    write_field_csv(&csv, points, values).map_err(numerical)?;
    let mut files = vec![csv];
    if let Some(g) = grid {
        let vtk = out.join(format!("{stem}.vtk"));
        write_vtk_structured_points(&vtk, g, values).map_err(numerical)?;
        files.push(vtk);
    }
    Ok(files)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub k: f64,
    pub n_elements: usize,
    pub residual: f64,
    pub iterations: usize,
    pub files: Vec<PathBuf>,
}

/// Scattered (rigid) or radiated field at the `[output]` points, written as
/// `field.csv` (and `field.vtk` for grids) with a `summary.json`.
pub fn solve(cfg: &RunConfig, out: &Path) -> Result<SolveReport, CliError> {
    let mesh_spec = section(&cfg.mesh, "mesh")?;
    let mut mesh = mesh_spec.build()?;
    if let Some(shape) = cfg.shape.as_ref().filter(|s| !s.values.is_empty()) {
        let params = ShapeParams::new(shape.values.clone(), shape.basis(mesh_spec.default_basis())?).map_err(config_err)?;
        mesh = deform(&mesh, &params).map_err(numerical)?;
    }
    let wave = section(&cfg.wave, "wave")?.build(&mesh)?;
    cfg.solver.validate().map_err(config_err)?;
    let (points, grid) = output_points(cfg)?;

    let t0 = Instant::now();
    let classes = classify_pairs_with_symmetry(&mesh, DEFAULT_NEAR_FACTOR, wave.symmetry);
    let op = assemble(&mesh, &wave, &classes).map_err(numerical)?;
    let t_assembly = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let sol = solve_operator(&op, &cfg.solver).map_err(numerical)?;
    let t_solve = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let field = evaluate_potential(&mesh, &wave, &sol.x, &points).map_err(numerical)?;
    let t_eval = t2.elapsed().as_secs_f64();

    let files = write_fields(out, "field", &points, grid.as_ref(), &field)?;
    println!(
        "N={} k={} residual={:.3e} iterations={} assembly={t_assembly:.2}s solve={t_solve:.2}s evaluate={t_eval:.2}s",
        mesh.num_elements(),
        wave.k,
        sol.residual_norm,
        sol.iterations
    );
    let report = SolveReport {
        k: wave.k,
        n_elements: mesh.num_elements(),
        residual: sol.residual_norm,
        iterations: sol.iterations,
        files,
    };
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "solve",
            "seed": cfg.seed,
            "k": report.k,
            "n_elements": report.n_elements,
            "formulation": wave.formulation,
            "residual": report.residual,
            "tolerance": cfg.solver.tol,
            "iterations": report.iterations,
            "n_points": points.len(),
            "timings_s": { "assembly": t_assembly, "solve": t_solve, "evaluate": t_eval },
            "files": report.files,
        }),
    )?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub stop_reason: String,
    pub final_params: Vec<f64>,
}

/// Full optimization run with `out` as the run directory. The run file is
/// copied in as `config.toml`; `summary.json` points at it.
pub fn optimize(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<OptimizeReport, CliError> {
    let spec = section(&cfg.optimize, "optimize")?;
    if !(spec.initial_step > 0.0) {
        return Err(CliError::Config("[optimize] initial_step must be positive".into()));
    }
    let (problem, init) = build_problem(cfg)?;
    fs::write(out.join("config.toml"), config_text)?;
    let opts = OptimOptions {
        max_iters: spec.max_iters,
        lbfgs: LbfgsOptions { initial_step: spec.initial_step, ftol: spec.ftol, gtol: spec.gtol, ..LbfgsOptions::default() },
        run_dir: Some(out.to_path_buf()),
        warm_start: spec.warm_start,
        compare_cold_start: spec.compare_cold_start,
    };
    let summary = |report: &OptimizeReport, error: Option<String>| {
        json!({
            "command": "optimize",
            "config": "config.toml",
            "seed": cfg.seed,
            "n_elements": problem.base.num_elements(),
            "n_params": problem.num_params(),
            "frequencies": problem.frequencies,
            "initial_params": init,
            "initial_loss": report.initial_loss,
            "final_loss": report.final_loss,
            "iterations": report.iterations,
            "stop_reason": report.stop_reason,
            "final_params": report.final_params,
            "error": error,
        })
    };
    match run_optimization(&problem, &init, &opts) {
        Ok((_, history)) => {
            let report = OptimizeReport {
                initial_loss: history.initial_loss,
                final_loss: history.final_loss(),
                iterations: history.records.len(),
                stop_reason: history.stop_reason.clone(),
                final_params: history.final_params.clone(),
            };
            println!(
                "loss {:.6e} -> {:.6e} in {} iterations ({})",
                report.initial_loss, report.final_loss, report.iterations, report.stop_reason
            );
            write_json(&out.join("summary.json"), &summary(&report, None))?;
            Ok(report)
        }
        Err(failure) => {
            if let Some(h) = &failure.history {
                let report = OptimizeReport {
                    initial_loss: h.initial_loss,
                    final_loss: h.final_loss(),
                    iterations: h.records.len(),
                    stop_reason: h.stop_reason.clone(),
                    final_params: failure.best_params.clone().unwrap_or_default(),
                };
                write_json(&out.join("summary.json"), &summary(&report, Some(failure.error.to_string())))?;
            }
            Err(optim_err(failure.error))
        }
    }
}

/// Mie-series scattered field at the `[output]` points, as `mie.csv` (and
/// `mie.vtk` for grids).
pub fn mie(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = section(&cfg.mie, "mie")?;
    let (points, grid) = output_points(cfg)?;
    let mie_cfg = MieConfig {
        a: spec.radius,
        k: spec.k,
        n_terms: spec.n_terms,
        amplitude: spec.amplitude(),
        direction: spec.direction,
    };
    let values = mie_scattered(&mie_cfg, &to_arrays(&points)).map_err(config_err)?;
    write_fields(out, "mie", &points, grid.as_ref(), &values)
}
