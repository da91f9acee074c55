use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dmri(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmri"))
        .args(args)
        .current_dir(dir)
        .env_remove("DMRI_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = dmri(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(str::trim))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
}

/// Small 2D scenario that satisfies the construction invariant.
fn scenario(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--shape", "48x48", "--seed", "2", "--out", "s"];
    args.extend_from_slice(extra);
    ok(&args, dir);
}

/// Width and height from a PNG header.
fn png_size(path: &Path) -> (u32, u32) {
    let b = fs::read(path).unwrap();
    assert_eq!(&b[1..4], b"PNG");
    let be = |i: usize| u32::from_be_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
    (be(16), be(20))
}

#[test]
fn simulate_writes_the_scenario_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["simulate", "--shape", "64x48x32", "--seed", "1", "--out", "desk"], tmp.path());
    let residual: f64 = field(&out, "residual").parse().unwrap();
    assert!(residual <= 1e-2);
    for f in ["r1.dmri", "r1_hat.dmri", "r2.dmri", "phi2.dmri", "v_true.dmri", "manifest.json"] {
        assert!(tmp.path().join("desk").join(f).is_file(), "{f}");
    }
}

#[test]
fn identity_scenario_files_match() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["simulate", "--shape", "16x12x8", "--identity", "--out", "id"], tmp.path());
    let d = tmp.path().join("id");
    assert_eq!(fs::read(d.join("r1.dmri")).unwrap(), fs::read(d.join("r2.dmri")).unwrap());
}

#[test]
fn usage_and_simulation_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dmri(&["simulate", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    fs::write(tmp.path().join("bad.json"), r#"{"scenario": {"shape": [48, 48], "noise": 0.1}}"#).unwrap();
    let out = dmri(&["simulate", "--config", "bad.json", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    // Too coarse for the construction invariant.
    let out = dmri(&["simulate", "--shape", "32x32", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));

    let out = dmri(&["mask", "--shape", "8x8", "--pct", "150", "--out", "m.dmri"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"scenario": {"shape": [48, 48], "seed": 2}, "method": {"wavelet_levels": 2}}"#,
    )
    .unwrap();
    let a = ok(&["simulate", "--config", "c.json", "--out", "a"], tmp.path());
    let b = ok(&["simulate", "--shape", "48x48", "--seed", "2", "--out", "b"], tmp.path());
    assert_eq!(field(&a, "config_hash"), field(&b, "config_hash"));
    let c = ok(&["simulate", "--config", "c.json", "--seed", "3", "--out", "c"], tmp.path());
    assert_ne!(field(&a, "config_hash"), field(&c, "config_hash"));
}

#[test]
fn zidft_full_sampling_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    scenario(tmp.path(), &["--noise-frac", "0"]);
    let out = ok(&["reconstruct", "--scenario", "s", "--method", "zidft", "--pct", "100", "--out", "z"], tmp.path());
    let eps: f64 = field(&out, "epsilon").parse().unwrap();
    assert!(eps.abs() <= 1e-10, "epsilon {eps}");
    let eval = ok(&["evaluate", "--scenario", "s", "--estimate", "z/r2_hat.dmri"], tmp.path());
    // The stored estimate is read back at file precision.
    let again: f64 = field(&eval, "epsilon").parse().unwrap();
    assert!(again.abs() <= 1e-10);
}

#[test]
fn delta_reconstruction_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    scenario(tmp.path(), &[]);
    let args = |out: &'static str| ["reconstruct", "--scenario", "s", "--method", "delta", "--pct", "10", "--seed", "3", "--out", out];
    let a = ok(&args("a"), tmp.path());
    let b = ok(&args("b"), tmp.path());
    assert_eq!(a, b);
    for f in ["r2_hat.dmri", "v_hat.dmri", "rigid.json", "trace.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    // The environment seed stands in for --seed.
    let out = Command::new(env!("CARGO_BIN_EXE_dmri"))
        .args(["reconstruct", "--scenario", "s", "--method", "zidft", "--pct", "10", "--out", "e"])
        .current_dir(tmp.path())
        .env("DMRI_SEED", "3")
        .output()
        .unwrap();
    let with_flag = ok(&["reconstruct", "--scenario", "s", "--method", "zidft", "--pct", "10", "--seed", "3", "--out", "f"], tmp.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), with_flag);
}

#[test]
fn tcs_requires_alignment() {
    let tmp = tempfile::tempdir().unwrap();
    scenario(tmp.path(), &[]);
    let out = dmri(&["reconstruct", "--scenario", "s", "--method", "tcs", "--pct", "10", "--out", "t"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--aligned"));
    assert!(!tmp.path().join("t").exists());

    ok(&["reconstruct", "--scenario", "s", "--method", "tcs", "--pct", "10", "--aligned", "--out", "t"], tmp.path());
    ok(&["reconstruct", "--scenario", "s", "--method", "delta", "--pct", "10", "--out", "d"], tmp.path());
    let out = ok(&["reconstruct", "--scenario", "s", "--method", "tcs", "--pct", "10", "--out", "d"], tmp.path());
    let eps: f64 = field(&out, "epsilon").parse().unwrap();
    assert!(eps.is_finite());
    assert!(tmp.path().join("d/x2_hat.dmri").is_file());
}

fn without_time(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols.remove(4);
            cols.join(",")
        })
        .collect()
}

#[test]
fn sweep_grid_csv_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    scenario(tmp.path(), &[]);
    let args = |out: &'static str| {
        [
            "sweep", "--scenario", "s", "--pcts", "1,2,5,10,20", "--methods", "delta,tcs,zidft", "--seeds", "1,2,3",
            "--out", out,
        ]
    };
    ok(&args("a"), tmp.path());
    ok(&args("b"), tmp.path());
    let a = fs::read_to_string(tmp.path().join("a/sweep.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/sweep.csv")).unwrap();
    assert_eq!(a.lines().count(), 46);
    assert_eq!(without_time(&a), without_time(&b));
    let (w, h) = png_size(&tmp.path().join("a/sweep.png"));
    assert!(w >= 640 && h >= 480);
    assert!(!tmp.path().join("a/sweep_errors.json").exists());
}
