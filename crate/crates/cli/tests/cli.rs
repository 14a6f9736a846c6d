use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cgq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const LORENZ: [&str; 8] = ["--problem", "lorenz", "--T", "1", "--q", "1", "--dt", "0.01"];

#[test]
fn solve_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve"];
    args.extend(LORENZ);
    args.extend(["--digits", "32"]);
    let o = cgq(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["headline"]["intervals"], 100);
    assert_eq!(rec["precision"]["digits"], 32);
    let traj = fs::read_to_string(dir.path().join("trajectory.txt")).unwrap();
    assert_eq!(traj.lines().skip_while(|l| *l != "---").count(), 101);

    args[0] = "estimate";
    let o = cgq(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(dir.path().join("estimate.json")).unwrap();
    assert!(cgq(&args, dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("estimate.json")).unwrap(), first);
    let est: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(est["config_hash"], rec["config_hash"]);
    assert_eq!(est["precision"]["bits"], 128);
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("t,S_D,S_G,S_C,S_C2"));
    assert_eq!(profile.lines().count(), 102);
}

#[test]
fn estimate_rejects_mismatched_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve"];
    args.extend(LORENZ);
    assert!(cgq(&args, dir.path()).status.success());
    let mut other = vec!["estimate"];
    other.extend(LORENZ);
    other.extend(["--digits", "40"]);
    let o = cgq(&other, dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stale") && err.contains("hint"), "{err}");
}

#[test]
fn shipped_long_configs_need_confirmation() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["lorenz_reference.cfg", "vanderpol.cfg"] {
        let cfg = configs().join(name);
        let o = cgq(&["config", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(o.status.success());
        assert!(String::from_utf8_lossy(&o.stdout).contains("long-running"), "{name}");
        let o = cgq(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(!o.status.success());
        assert!(String::from_utf8_lossy(&o.stderr).contains("--confirm-long"));
        assert!(!dir.path().join("trajectory.txt").exists());
    }
}

#[test]
fn mc_is_reproducible() {
    let run = |dir: &Path| {
        let o = cgq(&["mc", "--dt", "0.1,0.01,0.001", "--trials", "500", "--seed", "3"], dir);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(dir.join("mc.csv")).unwrap(), fs::read(dir.join("mc_samples.csv")).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn mc_single_trial_rms_is_sample_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgq(&["mc", "--dt", "0.1,0.05,0.02", "--trials", "1", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let samples = fs::read_to_string(dir.path().join("mc_samples.csv")).unwrap();
    let sample: f64 = samples.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("mc.json")).unwrap()).unwrap();
    let rms = report["sweep"]["rows"][0]["rms"].as_f64().unwrap();
    assert_eq!(rms, sample.abs());
}

#[test]
fn bad_flags_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgq(&["solve", "--problem", "duffing"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("duffing"));
    let o = cgq(&["solve", "--set", "nonsense"], dir.path());
    assert!(!o.status.success());
}
