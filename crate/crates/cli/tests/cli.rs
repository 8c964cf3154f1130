use std::path::Path;
use std::process::{Command, Output};

fn pgso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgso")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_usage_error(o: &Output, flag: &str) {
    assert_eq!(o.status.code(), Some(2), "{}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains(flag), "{err}");
}

fn generate(dir: &Path) -> String {
    let g = dir.join("g.bundle").display().to_string();
    let o = pgso(&["generate", "--size", "20", "--seed", "4", "--out", &g]);
    assert!(o.status.success(), "{}", stderr(&o));
    g
}

#[test]
fn help_and_version_exit_zero() {
    assert!(pgso(&["--help"]).status.success());
    assert!(pgso(&["--version"]).status.success());
    let o = pgso(&["train", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("--operator") && text.contains("[default: pgso:gcn_norm]"), "{text}");
}

#[test]
fn usage_errors_name_the_flag() {
    assert_usage_error(&pgso(&["train", "--operator", "pgso:nonexistent", "--out", "x"]), "--operator");
    assert_usage_error(&pgso(&["train", "--operator", "laplacian", "--out", "x"]), "--operator");
    assert_usage_error(&pgso(&["train", "--bogus", "--out", "x"]), "--bogus");
    assert_usage_error(&pgso(&["train", "--telemetry", "sometimes", "--out", "x"]), "--telemetry");
    assert_usage_error(&pgso(&["analyze", "--graph", "g", "--format", "csv", "--out", "x"]), "--format");
    assert_usage_error(&pgso(&["--threads", "0", "presets", "list"]), "--threads");
}

#[test]
fn runtime_errors_exit_one_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o").display().to_string();
    for (args, flag) in [
        (vec!["train", "--graph", "/nonexistent/g.bundle", "--out", &out], "--graph"),
        (vec!["train", "--epochs", "0", "--out", &out], "--epochs"),
        (vec!["train", "--dropout", "1.5", "--out", &out], "--dropout"),
        (vec!["train", "--task", "graph", "--out", &out], "--graph"),
        (vec!["sbm-study", "--levels", "0.5:0.25,0.4:0.3", "--out", &out], "--levels"),
    ] {
        let o = pgso(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("pgso: error: ") && err.contains(flag), "{args:?}: {err}");
    }
}

#[test]
fn presets_list_names_every_preset() {
    let o = pgso(&["presets", "list"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("symmetric_laplacian") && text.contains("m1=0 m2=-1 m3=1 e1=0 e2=-0.5 e3=-0.5 a=0"));
}

#[test]
fn analyze_writes_csv_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path());
    let out = dir.path().join("res/spec.csv");
    let o = pgso(&["analyze", "--graph", &g, "--operator", "preset:adjacency", "--out", &out.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda_min,lambda_max,support_lo,support_hi,n_clamped"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[2] <= row[0] && row[1] <= row[3] && row[4] == 0.0, "{row:?}");
    assert!(!csv.contains('\r'));
    let eig = std::fs::read_to_string(dir.path().join("res/spec.eigenvalues.csv")).unwrap();
    assert_eq!(eig.lines().count(), 61);
    let manifest = std::fs::read_to_string(dir.path().join("res/spec.run.json")).unwrap();
    let digest = pgso_cli::manifest::sha256_file(Path::new(&g)).unwrap();
    assert!(manifest.contains(&digest));

    let o = pgso(&["analyze", "--graph", &g, "--mode", "bounds", "--out", &out.display().to_string()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with(",,"), "{csv}");
}

#[test]
fn train_history_schema() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path());
    let out = dir.path().join("t");
    let o = pgso(&["train", "--graph", &g, "--epochs", "5", "--hidden", "4", "--telemetry", "off", "--out", &out.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let h = std::fs::read_to_string(out.join("history.csv")).unwrap();
    let mut lines = h.lines();
    assert_eq!(
        lines.next(),
        Some("epoch,loss,val_acc,test_acc,m1,m2,m3,e1,e2,e3,a,support_lo,support_hi,clamps")
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[4..11], &["0", "1", "0", "0", "-0.5", "-0.5", "1"]);
    assert_eq!(&first[11..13], &["", ""]);
    assert_eq!(h.lines().count(), 6);
    assert!(out.join("model.ckpt").exists() && !out.join("spectra.csv").exists());

    let out2 = dir.path().join("m");
    let o = pgso(&["train", "--sbm-size", "10", "--operator", "mpgso:gcn_norm", "--depth", "2", "--epochs", "3", "--out", &out2.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let h = std::fs::read_to_string(out2.join("history.csv")).unwrap();
    assert!(h.lines().next().unwrap().ends_with(",clamps,m1_1,m2_1,m3_1,e1_1,e2_1,e3_1,a_1,support_lo_1,support_hi_1"));
    let spectra = std::fs::read_to_string(out2.join("spectra.csv")).unwrap();
    assert_eq!(spectra.lines().next(), Some("epoch,layer,lambda_min,lambda_max,support_lo,support_hi,contained"));
}

#[test]
fn rerun_reproduces_and_guards_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = pgso(&["train", "--graph", &g, "--epochs", "6", "--hidden", "4", "--out", &a.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = a.join("run.json").display().to_string();
    let o = pgso(&["--threads", "2", "rerun", "--manifest", &manifest, "--out", &b.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["history.csv", "spectra.csv", "model.ckpt", "run.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    std::fs::write(&g, "5\n0 1\n").unwrap();
    let o = pgso(&["rerun", "--manifest", &manifest, "--out", &b.display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("changed"), "{}", stderr(&o));
}

#[test]
fn edge_list_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p4.txt");
    std::fs::write(&p, "4\n0 1\n1 2\n2 3\n").unwrap();
    let out = dir.path().join("p4.csv");
    let o = pgso(&[
        "analyze",
        "--graph",
        &p.display().to_string(),
        "--format",
        "edge_list",
        "--operator",
        "preset:unnormalised_laplacian",
        "--out",
        &out.display().to_string(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = std::fs::read_to_string(&out).unwrap();
    let vals: Vec<f64> = row.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // path Laplacian: 2 - 2 cos(k pi / 4), bounds [0, 4]
    assert!(vals[0].abs() < 1e-12 && (vals[1] - (2.0 + 2f64.sqrt())).abs() < 1e-12);
    assert_eq!((vals[2], vals[3]), (0.0, 4.0));
}
