//! End-to-end behaviour of `run_optimization` on small problems.

use diffbem::bem::{Formulation, PlaneWave, WaveConfig};
use diffbem::mesh::{make_icosphere, read_obj, ShapeBasis};
use diffbem::optimize::demo::ConeRadiator;
use diffbem::optimize::{
    run_optimization, EvalOptions, FieldObjective, LossSpec, OptimError, OptimOptions, Problem,
};
use diffbem::solver::SolveConfig;
use diffbem::{Complex64, Vec3d};

fn coarse(freqs: &[f64], n_knots: usize) -> Problem {
    let demo = ConeRadiator { n_knots, ..ConeRadiator::coarse() };
    let mesh = demo.mesh().unwrap();
    let spec = LossSpec::default().with_frequencies(freqs.to_vec());
    let template = demo.wave_template(&mesh);
    let solve = SolveConfig { tol: 1e-10, ..SolveConfig::default() };
    Problem::new(mesh, demo.basis(), &template, freqs, FieldObjective::directivity(spec).unwrap(), solve).unwrap()
}

fn options(k: usize, dir: Option<&std::path::Path>) -> OptimOptions {
    let mut opts = OptimOptions { max_iters: k, warm_start: true, run_dir: dir.map(Into::into), ..OptimOptions::default() };
    opts.lbfgs.initial_step = 0.005;
    opts
}

#[test]
fn zero_iterations_writes_initial_outputs_only() {
    let problem = coarse(&[1500.0], 2);
    let init = [0.002, -0.001, 0.003, 0.0];
    let dir = tempfile::tempdir().unwrap();
    let (mesh, history) = run_optimization(&problem, &init, &options(0, Some(dir.path()))).unwrap();
    assert!(history.records.is_empty());
    assert_eq!(history.final_params, init);
    assert_eq!(mesh.vertices(), problem.deformed(&init).unwrap().vertices());
    assert_eq!(history.final_loss(), history.initial_loss);
    for f in ["snapshots/iter_000.obj", "best.obj", "directivity_initial.csv", "directivity_final.csv", "final.obj", "history.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("journal.jsonl")).unwrap(), "");
    assert!(!dir.path().join("snapshots/iter_001.obj").exists());
}

#[test]
fn no_parameters_returns_the_base_mesh() {
    let problem = coarse(&[1500.0], 0);
    assert_eq!(problem.num_params(), 0);
    let (mesh, history) = run_optimization(&problem, &[], &options(5, None)).unwrap();
    assert_eq!(mesh.vertices(), problem.base.vertices());
    assert_eq!(mesh.elements(), problem.base.elements());
    assert!(history.records.is_empty());
    assert!(history.initial_loss.is_finite());
}

#[test]
fn matched_far_field_magnitude_is_already_optimal() {
    let mesh = make_icosphere(1, 1.0).unwrap();
    let template = WaveConfig::rigid(1.0, Formulation::BurtonMiller, PlaneWave::along_z(Complex64::new(1.0, 0.0)));
    let freq = template.medium.c / (2.0 * std::f64::consts::PI);
    let basis = ShapeBasis { lower: -0.2, upper: 0.2, ..ShapeBasis::axisymmetric(-1.0, 1.0, 3) };
    let points = vec![Vec3d::c(0.0, 0.0, 20.0)];
    let probe = |targets: Vec<Vec<f64>>| {
        let objective = FieldObjective::Magnitude { points: points.clone(), targets };
        Problem::new(mesh.clone(), basis.clone(), &template, &[freq], objective, SolveConfig::default()).unwrap()
    };
    let fields = probe(vec![vec![0.0]]).evaluate(&[0.0; 3], &EvalOptions::default()).unwrap().fields;
    let problem = probe(vec![vec![fields[0][0].norm()]]);
    let eval = problem.evaluate(&[0.0; 3], &EvalOptions { gradient: true, ..EvalOptions::default() }).unwrap();
    assert_eq!(eval.loss, 0.0);
    assert!(eval.gradient.unwrap().grad.iter().all(|g| *g == 0.0));
    let (out, history) = run_optimization(&problem, &[0.0; 3], &options(10, None)).unwrap();
    assert!(history.records.is_empty());
    assert_eq!(history.stop_reason, "GradientTolerance");
    assert_eq!(out.vertices(), mesh.vertices());
}

#[test]
fn journal_is_monotone_and_best_is_the_last_snapshot() {
    let problem = coarse(&[1200.0, 2400.0], 2);
    let dir = tempfile::tempdir().unwrap();
    let (mesh, history) = run_optimization(&problem, &[0.0; 4], &options(3, Some(dir.path()))).unwrap();
    assert!(!history.records.is_empty());
    let mut last = history.initial_loss;
    for r in &history.records {
        assert!(r.loss <= last, "{} > {last}", r.loss);
        last = r.loss;
    }
    let journal = std::fs::read_to_string(dir.path().join("journal.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), history.records.len());
    let n = history.records.len();
    let best = std::fs::read_to_string(dir.path().join("best.obj")).unwrap();
    let snap = std::fs::read_to_string(dir.path().join(format!("snapshots/iter_{n:03}.obj"))).unwrap();
    assert_eq!(best, snap);
    let reread = read_obj(&best).unwrap();
    assert_eq!(reread.elements(), mesh.elements());
    assert_eq!(history.final_params, history.records[n - 1].params);
}

#[test]
fn mismatched_loss_frequencies_are_rejected() {
    let demo = ConeRadiator::coarse();
    let mesh = demo.mesh().unwrap();
    let spec = LossSpec::default().with_frequencies(vec![1000.0, 2000.0]);
    let template = demo.wave_template(&mesh);
    let objective = FieldObjective::directivity(spec).unwrap();
    let r = Problem::new(mesh, demo.basis(), &template, &[1000.0, 2500.0], objective, SolveConfig::default());
    assert!(matches!(r, Err(OptimError::Config(_))));
}
