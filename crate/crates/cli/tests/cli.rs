use std::fs;
use std::process::{Command, Output};

fn concentrator(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concentrator")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn constants_subcommand_prints_round_trip_values() {
    let out = concentrator(&["constants", "--lambda", "0.75", "--p", "4", "--q", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap();
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert!((value("C") - 16.3655).abs() < 1e-3);
    assert!((value("alpha/6") - 2.11715).abs() < 1e-4);
    assert!((value("beta") / value("beta_gradient") - 1.0).abs() < 1e-6);

    let bad = concentrator(&["constants", "--lambda", "1", "--p", "6", "--q", "1"]);
    assert!(!bad.status.success());
}

#[test]
fn run_validates_and_echoes_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"a": 1.0, "omega": 1.0}"#).unwrap();
    let out = concentrator(&["run", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("lambda must be positive"), "{}", stderr(&out));

    let good = dir.path().join("flat.json");
    fs::write(&good, r#"{"metric": {"name": "flat", "box_length": 1.8, "cutoff_radius": 0.8}, "eps": [0.2]}"#).unwrap();
    let target = dir.path().join("out");
    let out = concentrator(&["run", good.to_str().unwrap(), "--stage", "profiles", "--out", target.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\"lambda\": 0.75"));
    assert!(text.contains("completed: profiles"));
    assert!(target.join("constants.json").exists());
    assert!(!target.join("samples.csv").exists());

    let out = concentrator(&["run", good.to_str().unwrap(), "--stage", "plot"]);
    assert!(!out.status.success());
}

#[test]
fn plot_data_on_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = concentrator(&["plot-data", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("sweep"), "{}", stderr(&out));
}
