use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn henonlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_henonlab")).args(args).env_remove("HENONLAB_WORKERS").output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = henonlab(&["orbits", "find", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn orbits_find_reports_the_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = henonlab(&["orbits", "find", "--seed", "1.4,1.4", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("orbits-find.json"));
    let z = &doc["result"]["orbit"]["points"][0]["z"];
    assert!((z[0].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(doc["result"]["orbit"]["type"], "Saddle");
    assert_eq!(doc["tool"], "henonlab");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    let hash = doc["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let csv = std::fs::read_to_string(dir.path().join("orbits.csv")).unwrap();
    assert!(csv.starts_with(&format!("# henonlab {} config_sha256={hash}\n", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn stdout_without_out_dir() {
    let out = henonlab(&["orbits", "find", "--lambda", "0", "--period", "1"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["command"], "orbits find");
}

#[test]
fn transit1d_certificates_hold() {
    let out = henonlab(&["implosion", "transit1d"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = &doc["result"]["certificates"];
    assert_eq!(c["winding"], 1);
    assert_eq!(c["forbidden_ok"], true);
    assert_eq!(c["derivative_ok"], true);
    assert_eq!(doc["result"]["all_certified"], true);
}

#[test]
fn failure_writes_an_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = henonlab(&["implosion", "transit1d", "--param", "z_in=30", "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "transit");
    assert_eq!(read_json(&dir.path().join("error.json")), err);

    // a later success clears the stale report
    assert!(henonlab(&["implosion", "transit1d", "--out", d]).status.success());
    assert!(!dir.path().join("error.json").exists());
}

#[test]
fn unknown_param_is_rejected() {
    let out = henonlab(&["orbits", "find", "--param", "nonsense=1"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "params");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command":"orbits find","params":{"lambda":0,"start":[0.0,0.0]}}"#).unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["orbits", "find", "--config", cfg.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = henonlab(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<Value>(&out.stdout).unwrap()
    };
    let a = run(&[]);
    let z = a["result"]["orbit"]["points"][0]["z"][0].as_f64().unwrap();
    assert!(z.abs() < 1e-12, "{z}");
    let b = run(&["--seed", "1.4,1.4"]);
    assert!((b["result"]["orbit"]["points"][0]["z"][0].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_ne!(a["config_sha256"], b["config_sha256"]);

    let out = henonlab(&["orbits", "unity", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    for cmd in [["render", "julia"], ["tangency", "hunt"], ["render", "bifurcation"]] {
        let d1 = tempfile::tempdir().unwrap();
        let d8 = tempfile::tempdir().unwrap();
        for (d, w) in [(&d1, "1"), (&d8, "8")] {
            let mut args = cmd.to_vec();
            args.extend_from_slice(&["--workers", w, "--out", d.path().to_str().unwrap()]);
            assert!(henonlab(&args).status.success());
        }
        let mut names: Vec<_> = std::fs::read_dir(d1.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 2);
        for n in names {
            let a = std::fs::read(d1.path().join(&n)).unwrap();
            let b = std::fs::read(d8.path().join(&n)).unwrap();
            assert_eq!(a, b, "{cmd:?} {n:?}");
        }
    }
}

#[test]
fn pgm_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = henonlab(&["render", "julia", "--param", "resolution=16", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let pgm = std::fs::read(dir.path().join("julia.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n# henonlab "));
    let text = String::from_utf8_lossy(&pgm[..120]);
    assert!(text.contains("\n16 16\n255\n"), "{text}");
}
