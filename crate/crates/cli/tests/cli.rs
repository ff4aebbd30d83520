use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};

fn kdvlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdvlab")).args(args).arg("--out").arg(out).env_remove("KDVLAB_SEED").output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn critical_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvlab(&["critical", "--smax", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("k,l,L,p"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().any(|r| r.starts_with("2,1,9.5977240918")));
    for r in &rows {
        let f: Vec<u64> = r.split(',').take(2).map(|v| v.parse().unwrap()).collect();
        assert!(f[0] * f[0] + f[0] * f[1] + f[1] * f[1] <= 100);
    }
    let m = manifest(dir.path());
    assert_eq!(m["schema"], "kdvlab-manifest/1");
    assert_eq!(m["experiment"], "critical");
    assert_eq!(m["passed"], true);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let art = &m["artifacts"][0];
    assert_eq!(art["name"], "pairs.csv");
    assert_eq!(art["sha256"], hex(csv.as_bytes()));
}

#[test]
fn config_file_matches_flags() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = b.path().join("exp.toml");
    std::fs::write(&cfg, format!("experiment = \"critical\"\n[params]\nsmax = 100\n[output]\ndir = {:?}\n", b.path())).unwrap();
    assert_eq!(kdvlab(&["critical", "--smax", "100"], a.path()).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_kdvlab")).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let read = |d: &Path| std::fs::read(d.join("pairs.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"critical\"\n[params]\nsmax = 100\nsmaxx = 3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kdvlab")).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("smaxx"));
}

#[test]
fn missing_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvlab(&["roots"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.z"));
    let o = kdvlab(&["obstruction", "--k", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pair"));
}

#[test]
fn numerical_domain_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvlab(&["critical", "--smax", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvlab(&["hum", "--T", "2", "--target", "one-minus-cos"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["passed"], false);
    let h: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("hum.json")).unwrap()).unwrap();
    assert!(h["m_projection"].as_f64().unwrap() > 0.99);
    assert!(h["residual"].as_f64().unwrap() > 0.1);
}

#[test]
fn seed_env_and_reruns() {
    let run = |seed: Option<&str>| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Command::new(env!("CARGO_BIN_EXE_kdvlab"));
        c.args(["toy", "--T", "0.5", "--check", "--samples", "6", "--seed", "1", "--jobs", "1", "--out"]).arg(dir.path());
        match seed {
            Some(s) => c.env("KDVLAB_SEED", s),
            None => c.env_remove("KDVLAB_SEED"),
        };
        let o = c.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(dir.path().join("toy_samples.csv")).unwrap(), manifest(dir.path()))
    };
    let (a, ma) = run(None);
    let (b, mb) = run(None);
    assert_eq!(a, b);
    assert_eq!(ma["artifacts"], mb["artifacts"]);
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    let (c, mc) = run(Some("9"));
    assert_ne!(a, c);
    assert_eq!(mc["config"]["sampling"]["seed"], 9);
    assert_ne!(ma["config_hash"], mc["config_hash"]);
}

#[test]
fn bad_seed_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kdvlab"))
        .args(["critical", "--smax", "10", "--out"])
        .arg(dir.path())
        .env("KDVLAB_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("KDVLAB_SEED"));
}

#[test]
fn roots_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvlab(&["roots", "--z", "-1.5", "--z-im", "0.25", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("roots.json")).unwrap()).unwrap();
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
}
