use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asyncmatd"))
}

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let text = fs::read_to_string(config_path("two_state.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["grid"]["iterations"] = 300.into();
    v["grid"]["replications"] = 6.into();
    let path = dir.join("small.json");
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        if entry.extension().is_some_and(|e| e == "csv") {
            let rel = entry.strip_prefix(dir).unwrap().display().to_string();
            out.push((rel, fs::read(&entry).unwrap()));
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn ground_truth_prints_fixed_point() {
    let out = bin()
        .args(["ground-truth", "--config", &config_path("two_state.json")])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["theta_star"][0].as_f64().unwrap() - 24.0 / 13.0).abs() < 1e-10);
}

#[test]
fn run_is_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3", "8"] {
        let out_dir = tmp.path().join(format!("t{threads}"));
        let status = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(read_csvs(&out_dir));
    }
    assert!(outputs[0].len() >= 4 * 7);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let run = |seed: &str, dir: &str| {
        let out_dir = tmp.path().join(dir);
        assert!(bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .args(["--seed", seed])
            .status()
            .unwrap()
            .success());
        read_csvs(&out_dir)
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn plot_data_from_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let out_dir = tmp.path().join("o");
    assert!(bin().args(["run", "--config"]).arg(&config).arg("--out").arg(&out_dir).status().unwrap().success());
    let out = bin().args(["plot-data", "--out"]).arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(out_dir.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert!(svg.contains("N=4 delay=uniform(0,10)"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let status = bin().args(["run"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"instance": {"kind": "random"}}"#).unwrap();
    assert_eq!(bin().args(["run", "--config"]).arg(&bad).status().unwrap().code(), Some(2));
    let missing = tmp.path().join("missing.json");
    assert_eq!(bin().args(["run", "--config"]).arg(&missing).status().unwrap().code(), Some(3));
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(bin().args(["plot-data", "--out"]).arg(&empty).status().unwrap().code(), Some(3));
    let one_cell = small_config(tmp.path());
    assert_eq!(bin().args(["sweep", "--config"]).arg(&one_cell).status().unwrap().code(), Some(2));
}

#[test]
fn verify_passes_on_two_state() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let out = bin().args(["verify", "--config"]).arg(&config).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn verify_refuses_features_outside_the_unit_ball() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("two_state.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["instance"]["features"]["phi"] = serde_json::json!([[1.5, 0.0], [0.0, 1.0]]);
    let path = tmp.path().join("wide.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = bin().args(["verify", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("norm"));
}
