//! End-to-end tests of the command-line interface: exit codes, summary files,
//! determinism of emitted CSVs.

use std::path::Path;
use std::process::{Command, Output};

use epicard_core::field::{save_field_csv, Field};
use epicard_core::mesh::{generate_disk, save_mesh, BoundaryTag};
use epicard_core::operator::{save_operator, FirstOrderOperator};
use num_complex::Complex64;

fn epicard() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epicard"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn summary(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("summary.txt")).expect("summary exists")
}

fn summary_value(dir: &Path, key: &str) -> String {
    summary(dir)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("summary key {key} missing in {}", summary(dir)))
}

#[test]
fn symbol_check_reports_margin_and_adjoint() {
    let dir = tempfile::tempdir().unwrap();
    let op_path = dir.path().join("grad.toml");
    save_operator(&FirstOrderOperator::gradient(2), &op_path).unwrap();
    let out = run_ok(epicard().args([
        "symbol-check",
        "--operator",
        op_path.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("margin (64 samples): 1.000000"), "{text}");
    // the printed adjoint is -div: coefficient rows [-1, 0] and [0, -1]
    assert!(text.contains("[[-1.0, 0.0], [-0.0, 0.0]]"), "{text}");
    let margin: f64 = summary_value(dir.path(), "injectivity_margin").parse().unwrap();
    assert!((margin - 1.0).abs() < 1e-12);
}

#[test]
fn pipeline_with_zero_data_reports_tiny_v() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
[operator]
builtin = "gradient"

[mesh]
kind = "generate"
r_in = 1.0
r_out = 2.0
h = 0.25

[data]
kind = "harmonic"
m = 1
amplitude = 0.0

[method]
kind = "tikhonov"
alpha = 1e-8
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    run_ok(epicard().args([
        "pipeline",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(summary_value(&out_dir, "status"), "ok");
    let v_norm: f64 = summary_value(&out_dir, "v_norm_boundary_l2").parse().unwrap();
    assert!(v_norm <= 1e-10, "v norm {v_norm}");
    assert!(out_dir.join("v.csv").exists());
    assert!(out_dir.join("v.vtk").exists());
}

#[test]
fn neumann_rejects_incompatible_constant_data() {
    let dir = tempfile::tempdir().unwrap();
    let op_path = dir.path().join("grad.toml");
    save_operator(&FirstOrderOperator::gradient(2), &op_path).unwrap();
    let mesh = generate_disk(1.0, 0.2).unwrap();
    let mesh_path = dir.path().join("disk.txt");
    save_mesh(&mesh, &mesh_path).unwrap();
    let data = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |_, _, _| {
        Complex64::new(1.0, 0.0)
    })
    .unwrap();
    let data_path = dir.path().join("h0.csv");
    save_field_csv(&mesh, &data, &data_path).unwrap();

    let out_dir = dir.path().join("out");
    let out = epicard()
        .args([
            "neumann",
            "--operator",
            op_path.to_str().unwrap(),
            "--mesh",
            mesh_path.to_str().unwrap(),
            "--data",
            data_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}",
        String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary_value(&out_dir, "status"), "error");
    assert_eq!(summary_value(&out_dir, "failure_stage"), "neumann-solve");
    let defect: f64 = summary_value(&out_dir, "compatibility_defect").parse().unwrap();
    assert!(defect >= 0.1, "defect {defect}");
}

#[test]
fn neumann_accepts_compatible_data_via_files() {
    let dir = tempfile::tempdir().unwrap();
    let op_path = dir.path().join("grad.toml");
    save_operator(&FirstOrderOperator::gradient(2), &op_path).unwrap();
    let mesh = generate_disk(1.0, 0.2).unwrap();
    let mesh_path = dir.path().join("disk.txt");
    save_mesh(&mesh, &mesh_path).unwrap();
    let data = Field::from_fn_boundary(&mesh, BoundaryTag::Inner, 1, |x, y, _| {
        Complex64::new(x / (x * x + y * y).sqrt(), 0.0)
    })
    .unwrap();
    let data_path = dir.path().join("h0.csv");
    save_field_csv(&mesh, &data, &data_path).unwrap();

    let out_dir = dir.path().join("out");
    run_ok(epicard().args([
        "neumann",
        "--operator",
        op_path.to_str().unwrap(),
        "--mesh",
        mesh_path.to_str().unwrap(),
        "--data",
        data_path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(summary_value(&out_dir, "status"), "ok");
    assert_eq!(summary_value(&out_dir, "kernel_dim"), "1");
    assert!(out_dir.join("h.csv").exists());
}

#[test]
fn same_config_and_seed_give_identical_csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
seed = 3
noise_level = 0.01

[operator]
builtin = "gradient"

[mesh]
kind = "generate"
r_in = 1.0
r_out = 2.0
h = 0.2

[data]
kind = "harmonic"
m = 1
amplitude = 4.0

[method]
kind = "tikhonov"
alpha = 1e-6
"#,
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(epicard().args([
            "pipeline",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]));
    }
    for name in [
        "v.csv",
        "h.csv",
        "h0.csv",
        "u_b.csv",
        "trace_inner.csv",
        "flux_inner.csv",
        "cauchy_history.csv",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // a different seed changes the noisy outputs
    let out_c = dir.path().join("c");
    run_ok(epicard().args([
        "pipeline",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_c.to_str().unwrap(),
        "--seed",
        "4",
    ]));
    let a = std::fs::read(out_a.join("v.csv")).unwrap();
    let c = std::fs::read(out_c.join("v.csv")).unwrap();
    assert_ne!(a, c, "different seeds should change the noisy reconstruction");
}

#[test]
fn convergence_study_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(epicard().args([
        "convergence",
        "--fixture",
        "zaremba-m1",
        "--levels",
        "3",
        "--h0",
        "0.2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("observed order"), "{text}");
    let order: f64 = summary_value(dir.path(), "observed_order").parse().unwrap();
    assert!(order >= 1.8, "observed order {order}");
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "header + 3 levels: {csv}");
}

#[test]
fn pipeline_failure_writes_stage_to_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    // an unattainably strict compatibility tolerance forces a Neumann abort
    std::fs::write(
        &config,
        r#"
ctol = 1e-18

[operator]
builtin = "gradient"

[mesh]
kind = "generate"
r_in = 1.0
r_out = 2.0
h = 0.25

[data]
kind = "harmonic"
m = 1
amplitude = 4.0

[method]
kind = "tikhonov"
alpha = 1e-8
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = epicard()
        .args([
            "pipeline",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary_value(&out_dir, "status"), "error");
    assert_eq!(summary_value(&out_dir, "failure_stage"), "neumann");
    // the defect is still recorded, and step-1 outputs were written
    assert!(summary(&out_dir).contains("compatibility_defect"));
    assert!(out_dir.join("u_b.csv").exists());
    assert!(!out_dir.join("v.csv").exists());
}

#[test]
fn bad_input_exits_one() {
    let out = epicard()
        .args(["mesh", "--kind", "annulus", "--r-in", "2", "--r-out", "1", "--h", "0.1",
               "--out-dir", "/tmp/epicard-bad-input-test"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn alternating_method_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
[operator]
builtin = "gradient"

[mesh]
kind = "generate"
r_in = 1.0
r_out = 2.0
h = 0.25

[data]
kind = "harmonic"
m = 1
amplitude = 4.0

[method]
kind = "alternating"
max_iter = 120
stop_tol = 1e-9
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    run_ok(epicard().args([
        "cauchy",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(summary_value(&out_dir, "method"), "ALTERNATING");
    assert!(out_dir.join("residual_history.csv").exists());
}
