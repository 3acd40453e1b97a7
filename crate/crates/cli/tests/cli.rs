use std::path::Path;
use std::process::{Command, Output};

fn carleson(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleson"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn all_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["all", "--K", "8", "--seed", "3"];
    let ra = carleson(&args, a.path());
    let rb = carleson(&args, b.path());
    assert_eq!(ra.status.code(), rb.status.code());
    for name in ["report.json", "report.csv", "decomposition.json", "f.csv", "N.csv", "tiles.svg", "decay.svg", "counting.svg"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn zero_function_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let r = carleson(&["all", "--K", "8", "--f", "zero"], dir.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"K": 10, "bogus": 1}"#).unwrap();
    let r = carleson(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(r.status.code(), Some(2));

    let r = carleson(&["verify", "--K", "3"], dir.path());
    assert_eq!(r.status.code(), Some(2));
    let r = carleson(&["verify", "--K", "8", "--set", "no.such.check=1"], dir.path());
    assert_eq!(r.status.code(), Some(2));
    let r = carleson(&["verify", "--K", "8", "--f", "wavelet:3"], dir.path());
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"K": 8, "seed": 5, "f": "indicator:0.125", "N": "chirp", "check": "a,c"}"#).unwrap();
    let from_file = tempfile::tempdir().unwrap();
    let from_flags = tempfile::tempdir().unwrap();
    let r1 = carleson(&["verify", "--config", cfg.to_str().unwrap()], from_file.path());
    let r2 = carleson(&["verify", "--K", "8", "--seed", "5", "--f", "indicator:0.125", "--N", "chirp", "--check", "a,c"], from_flags.path());
    assert_eq!(r1.status.code(), r2.status.code());
    let j1 = std::fs::read(from_file.path().join("report.json")).unwrap();
    let j2 = std::fs::read(from_flags.path().join("report.json")).unwrap();
    assert_eq!(j1, j2);
    let report: serde_json::Value = serde_json::from_slice(&j1).unwrap();
    assert_eq!(report["meta"]["resolution"], 8);
    assert_eq!(report["meta"]["seed"], 5);
    assert_eq!(report["meta"]["f"], "indicator:0.125");
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"K": 8, "seed": 5}"#).unwrap();
    let r = carleson(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "6", "--check", "c"], dir.path());
    assert!(matches!(r.status.code(), Some(0 | 1)));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["seed"], 6);
}

#[test]
fn failing_threshold_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let r = carleson(&["verify", "--K", "8", "--check", "c", "--set", "c.lp=1e-9"], dir.path());
    assert_eq!(r.status.code(), Some(1));
}
