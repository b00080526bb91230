use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divfree-stokes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = run(&[
        "run", "--k", "0", "--l", "0", "--levels", "1:3", "--out", out_dir, "--postprocess", "--vtk", "--properties",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("| 2^-3 |"));
    assert!(text.contains("pass tn_continuity"));

    let csv = std::fs::read_to_string(dir.path().join("study_k0_l0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("h,err_u,ord_u,"));
    assert!(lines[3].starts_with("1.2500000000e-01,"));
    for level in 1..=3 {
        let vtk = std::fs::read_to_string(dir.path().join(format!("level{level}.vtk"))).unwrap();
        assert!(vtk.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(vtk.contains(&format!("CELL_DATA {}\n", 2 << (2 * level))));
    }
    assert!(Path::new(&dir.path().join("study_k0_l0.md")).exists());
    let props: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("properties.json")).unwrap()).unwrap();
    assert_eq!(props["passed"], serde_json::Value::Bool(true));
}

#[test]
fn invalid_arguments_exit_with_usage_code() {
    for args in [
        &["run", "--k", "0", "--l", "1"][..],
        &["run", "--k", "1", "--l", "0", "--levels", "5:3"],
        &["run", "--k", "1", "--l", "0", "--levels", "3-5"],
        &["run", "--k", "1", "--l", "0", "--example", "missing"],
        &["run", "--k", "1", "--l", "0", "--levels", "3:11"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flipped_normals_fail_the_property_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--k",
        "0",
        "--l",
        "0",
        "--levels",
        "1:2",
        "--properties",
        "--debug-flip-normals",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("FAIL tn_continuity"));
    let props: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("properties.json")).unwrap()).unwrap();
    assert_eq!(props["passed"], serde_json::Value::Bool(false));
}
