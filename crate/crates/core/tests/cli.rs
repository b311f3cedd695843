use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_cli(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_kpp-lab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr holds the error JSON")
}

#[test]
fn lyapunov_at_critical_length() {
    let dir = tempfile::tempdir().unwrap();
    let config = "command = \"lyapunov\"\n\
                  [numerics]\nn = 128\ndt = 0.0078125\nhorizon = 200\n\
                  [problem]\nl = 1.5707963267948966\n";
    let out = run_cli(dir.path(), config, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/lyapunov.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("l,bc,gamma,value,window_spread,horizon"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "mixed");
    let value: f64 = row[3].parse().unwrap();
    assert!(value.abs() < 1e-3, "{value}");
}

#[test]
fn pullback_below_critical_length_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(dir.path(), "[problem]\nl = 1.0\n", &["pullback"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["code"], "negative_exponent");
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("negative principal exponent"));
    assert_eq!(err["context"]["command"], "pullback");
}

#[test]
fn sweep_three_by_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = "command = \"sweep\"\n[numerics]\nn = 64\n\
                  [sweep]\nmu = [0.001, 1.0, 2.0]\nh0 = [0.4, 1.7, 2.0]\namplitude = [1.0]\n";
    let out = run_cli(dir.path(), config, &["--jobs", "2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/verdicts.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "mu,h0,amplitude,outcome,final_h,final_sup_u,stop_reason"
    );
    assert_eq!(lines.len(), 10);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        let h0: f64 = cols[1].parse().unwrap();
        if h0 > std::f64::consts::FRAC_PI_2 {
            assert_eq!(cols[3], "spreading", "{line}");
        }
    }
    let plot = fs::read_to_string(dir.path().join("out/verdicts.dat")).unwrap();
    assert!(plot.starts_with("# mu h0 amplitude outcome"));
    assert_eq!(plot.lines().count(), 10);
}

#[test]
fn unknown_key_exits_two_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(dir.path(), "[problem]\nh00 = 1.0\nmu = -2\n", &["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["code"], "config");
    let violations = err["context"]["violations"].as_array().unwrap();
    assert!(violations.len() >= 2);
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("did you mean \"h0\""));
}

#[test]
fn unknown_command_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(dir.path(), "", &["simulat"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_outputs_are_deterministic() {
    let config = "command = \"simulate\"\n[numerics]\nn = 64\n\
                  [problem]\nh0 = 2.0\nmu = 1.0\nsnapshot_times = [1.0]\n\
                  [thresholds]\nt_max = 5.0\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run_cli(d.path(), config, &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["trajectory.csv", "trajectory.dat", "snapshots.csv"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let plot = fs::read_to_string(a.path().join("out/trajectory.dat")).unwrap();
    assert_eq!(plot.lines().next(), Some("# t h"));
    assert!(plot.lines().skip(1).all(|l| l.split(' ').count() == 2));
    let names: Vec<String> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 3, "no stray temporary files: {names:?}");
}

#[test]
fn classify_and_critical_mu_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[numerics]\nn = 64\n[problem]\nh0 = 2.0\nmu = 1.0\n";
    let out = run_cli(dir.path(), config, &["classify"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verdict.json")).unwrap())
            .unwrap();
    assert_eq!(v["outcome"], "spreading");

    let config = "[numerics]\nn = 64\n[problem]\nh0 = 0.4\nbracket = [0.001, 100.0]\ntol = 1.0\n";
    let out = run_cli(dir.path(), config, &["critical-mu"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/critical_mu.json")).unwrap())
            .unwrap();
    assert!(v["mu_hi"].as_f64().unwrap() - v["mu_lo"].as_f64().unwrap() <= 1.0);
    assert!(v["probes"].as_array().unwrap().len() >= 2);
}

#[test]
fn double_front_and_critical_length_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[numerics]\nn = 64\n[problem]\ng0 = -1.8\nh0 = 1.8\nmu = 1.0\n\
                  [thresholds]\nt_max = 2.0\n";
    let out = run_cli(dir.path(), config, &["double-front"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,h,g,sup_u,hprime\n"));

    let config = "[numerics]\nn = 64\ndt = 0.015625\nhorizon = 100\n[problem]\ntol = 0.01\n";
    let out = run_cli(dir.path(), config, &["critical-length"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/critical_length.json")).unwrap(),
    )
    .unwrap();
    assert!((v["value"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-2);
}
