use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wavespec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavespec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_reproducible_and_transformable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    fs::write(&spec, "scales = 5\n\n[[component]]\nscale = 3\ndirection = \"h\"\nenergy = 1.5\n").unwrap();
    let a = dir.path().join("a.grid");
    let b = dir.path().join("b.grid");
    for out in [&a, &b] {
        let o = wavespec(&["simulate", p(&spec), "--dims", "64", "--seed", "4", "-o", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let out = dir.path().join("t");
    let o = wavespec(&["transform", p(&a), "--taper", "0", "--levels", "5", "--scales", "2-4", "--local", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("a.spectrum.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(out.join("a.lws_j5.csv").exists());
}

#[test]
fn demo_verify_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = wavespec(&["demo", p(&data), "--classes", "4", "--members", "4", "--size", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = data.join("manifest.toml");
    let out = dir.path().join("v");
    let o = wavespec(&["verify", p(&manifest), "--scales", "2-4", "--nb", "3", "--nvec", "1-2", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("skill_perf"));
    assert_eq!(fs::read_to_string(out.join("skill_vs_nvec.csv")).unwrap().lines().count(), 3);
    assert!(out.join("cache").is_dir());

    let again = dir.path().join("r");
    let o = wavespec(&["report", p(&out.join("report.json")), "--out-dir", p(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["skill_vs_nvec.csv", "likelihoods.csv", "mean_posterior.csv"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("bad.grid");
    fs::write(&grid, b"not a grid file at all, definitely not").unwrap();
    let o = wavespec(&["transform", p(&grid), "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.grid"));

    let o = wavespec(&["verify", p(&dir.path().join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn constant_fields_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flat.csv");
    let row = vec!["1.0"; 32].join(",");
    fs::write(&csv, vec![row; 32].join("\n")).unwrap();
    let o = wavespec(&["transform", p(&csv), "--taper", "0", "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
