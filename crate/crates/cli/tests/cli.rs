//! Command behaviour through the library entry points and the binary.

use std::path::Path;
use std::process::Command;

use diffbem_cli::commands;
use diffbem_cli::config::RunConfig;

fn bin(dir: &Path, config: &str, args: &[&str]) -> std::process::Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_diffbem"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

const SOLVE: &str = r#"
[mesh]
kind = "icosphere"
subdivisions = 1

[wave]
k = 2.0
bc = { type = "rigid", amplitude = [AMP, 0.0] }

[output.sphere]
radius = 2.0
count = 20
"#;

#[test]
fn configuration_errors_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("typo", SOLVE.replace("AMP", "1.0").replace("subdivisions", "subdivision"), vec!["solve"]),
        ("empty k list", "[validate_sphere]\nsubdivisions = [1]\nk = []\n".to_string(), vec!["validate-sphere"]),
        (
            "h = 0",
            std::fs::read_to_string("../../configs/grad_check_radiator.toml").unwrap().replace("h = 1e-6", "h = 0.0"),
            vec!["grad-check"],
        ),
        ("missing mesh file", "[mesh]\nkind = \"file\"\npath = \"nowhere.obj\"\n".to_string(), vec!["solve"]),
        ("f32", SOLVE.replace("AMP", "1.0"), vec!["solve", "--precision", "f32"]),
        ("zero threads", SOLVE.replace("AMP", "1.0"), vec!["solve", "--threads", "0"]),
        ("both k and frequency", SOLVE.replace("AMP", "1.0").replace("k = 2.0", "k = 2.0\nfrequency = 100.0"), vec!["solve"]),
    ];
    for (name, config, args) in cases {
        let out = bin(dir.path(), &config, &args);
        assert_eq!(out.status.code(), Some(4), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_diffbem"))
        .args(["solve", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn acceptance_failure_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[validate_sphere]\nsubdivisions = [1]\nk = [2.0]\nmax_error = [1e-9]\n";
    let out = bin(dir.path(), config, &["validate-sphere"]);
    assert_eq!(out.status.code(), Some(2));
    let csv = std::fs::read_to_string(dir.path().join("out/validate_sphere.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("n,k,mean_abs_error,solve_iters\n80,2,"));
}

#[test]
fn grad_check_without_parameters_is_an_empty_success() {
    let text = std::fs::read_to_string("../../configs/grad_check_radiator.toml")
        .unwrap()
        .replace("n_knots = 2", "n_knots = 0")
        .replace("values = [0.004, -0.003, 0.006, 0.002]", "values = []");
    let cfg = RunConfig::parse(&text, Path::new("../../configs")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = commands::grad_check(&cfg, dir.path()).unwrap();
    assert!(report.rows.is_empty() && report.failures.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("grad_check.csv")).unwrap();
    assert_eq!(csv, "index,adjoint,fd,rel_error,checked\n");
}

#[test]
fn grad_check_refuses_large_meshes() {
    let text = std::fs::read_to_string("../../configs/grad_check_radiator.toml")
        .unwrap()
        .replace("divisions = [2, 3, 1, 4, 1]", "divisions = [4, 6, 1, 6, 2]")
        .replace("azimuth_divisions = 4", "azimuth_divisions = 8");
    let cfg = RunConfig::parse(&text, Path::new("../../configs")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = commands::grad_check(&cfg, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}

#[test]
fn zero_incident_amplitude_gives_zero_fields() {
    let cfg = RunConfig::parse(&SOLVE.replace("AMP", "0.0"), Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = commands::solve(&cfg, dir.path()).unwrap();
    assert_eq!(report.residual, 0.0);
    let csv = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[3..].iter().all(|v| *v == 0.0), "{row}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_elements"], 80);
    assert_eq!(summary["n_points"], 20);
}

#[test]
fn solve_records_residual_below_tolerance() {
    let cfg = RunConfig::parse(&SOLVE.replace("AMP", "1.0"), Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = commands::solve(&cfg, dir.path()).unwrap();
    assert!(report.residual <= cfg.solver.tol);
    assert!(report.iterations > 0);
    for f in &report.files {
        assert!(f.is_file());
    }
}

#[test]
fn grid_of_64_cubed_points_writes_262144_vtk_values() {
    let text = r#"
[mesh]
kind = "icosphere"
subdivisions = 0

[wave]
k = 1.0
bc = { type = "rigid" }

[output.grid]
origin = [2.0, 2.0, 2.0]
spacing = [0.05, 0.05, 0.05]
counts = [64, 64, 64]
"#;
    let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    commands::solve(&cfg, dir.path()).unwrap();
    let vtk = std::fs::read_to_string(dir.path().join("field.vtk")).unwrap();
    assert!(vtk.contains("DATASET STRUCTURED_POINTS\nDIMENSIONS 64 64 64\n"));
    assert!(vtk.contains("POINT_DATA 262144\n"));
    let blocks: Vec<&str> = vtk.split("LOOKUP_TABLE default\n").skip(1).collect();
    assert_eq!(blocks.len(), 3);
    for b in blocks {
        let values = b.lines().take_while(|l| !l.starts_with("SCALARS")).count();
        assert_eq!(values, 262144);
    }
}

#[test]
fn zero_iteration_optimize_writes_initial_outputs() {
    let text = std::fs::read_to_string("../../configs/grad_check_radiator.toml")
        .unwrap()
        .replace("[grad_check]\nh = 1e-6\ntolerance = 1e-3\n", "[optimize]\nmax_iters = 0\n");
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &text, &["optimize"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out");
    for f in ["config.toml", "summary.json", "best.obj", "final.obj", "directivity_initial.csv", "history.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 0);
    assert_eq!(summary["initial_loss"], summary["final_loss"]);
    assert_eq!(std::fs::read_to_string(run.join("config.toml")).unwrap(), text);
}

#[test]
fn mie_command_writes_grid_files() {
    let cfg = RunConfig::parse(&std::fs::read_to_string("../../configs/mie.toml").unwrap(), Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = commands::mie(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let csv = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(csv.lines().count(), 1 + 25 * 25);
}
