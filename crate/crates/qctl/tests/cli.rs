use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qctl"))
        .args(args)
        .output()
        .expect("spawn qctl")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[i].parse().unwrap()).collect()
}

#[test]
fn shipped_configs_validate() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = qctl(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(
            code(&out),
            0,
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("valid = true"));
    }
}

#[test]
fn list_profiles_names_catalog() {
    let out = qctl(&["list-profiles"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["sine", "flat", "flat-phase-only"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn config_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[params]\nepsilon = 0.01\nbogus = 1\n");
    assert_eq!(code(&qctl(&["transfer", "--config", &unknown])), 2);
    let bad_eps = write(dir.path(), "e.toml", "[params]\nepsilon = 1.5\n");
    assert_eq!(code(&qctl(&["transfer", "--config", &bad_eps])), 2);
    let wrong = write(dir.path(), "w.toml", "experiment = \"scaling\"\n");
    assert_eq!(code(&qctl(&["transfer", "--config", &wrong])), 2);
    assert_eq!(code(&qctl(&["transfer"])), 2);
    assert_eq!(code(&qctl(&["no-such-experiment"])), 2);
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&qctl(&["validate", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn step_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[policy]\nmax_steps = 1000\n");
    let out_prefix = dir.path().join("t");
    let out = qctl(&["transfer", "--config", &cfg, "--out", out_prefix.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flat_phase_only_fails_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[profile]\nname = \"flat-phase-only\"\n");
    let prefix = dir.path().join("t");
    let out = qctl(&["transfer", "--config", &cfg, "--out", prefix.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL final_fidelity"));
}

#[test]
fn zero_amplitude_keeps_population() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[params]\ndelta = 0.0\n");
    let prefix = dir.path().join("t");
    let out = qctl(&["transfer", "--config", &cfg, "--out", prefix.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let fid = csv_column(&dir.path().join("t.csv"), "fidelity_e2");
    assert!(
        fid.iter().all(|&f| f <= 1e-24),
        "{:e}",
        fid.iter().copied().fold(0.0, f64::max)
    );
}

#[test]
fn delta_sweep_rejects_closed_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[params]\ndelta = [0.0, 0.5]\n");
    assert_eq!(
        code(&qctl(&["validate", "--config", &cfg, "--experiment", "delta-sweep"])),
        2
    );
}

#[test]
fn outputs_are_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("lemma-fast.toml");
    let mut texts = Vec::new();
    let prefix = dir.path().join("out").join("lemma");
    for _ in 0..2 {
        let out = qctl(&[
            "lemma-fast",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            prefix.to_str().unwrap(),
            "--threads",
            "2",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let read = |suffix: &str| fs::read(dir.path().join("out").join(format!("lemma{suffix}"))).unwrap();
        texts.push((read(".csv"), read(".svg"), read(".summary.txt")));
    }
    assert!(texts[0] == texts[1], "outputs differ between runs");
    let summary = String::from_utf8(texts[0].2.clone()).unwrap();
    assert!(summary.lines().any(|l| l == "overall = pass"));
    assert!(summary.lines().any(|l| l.starts_with("config.epsilon = ")));
    assert!(summary.lines().all(|l| l.contains(" = ")));
    assert!(String::from_utf8(texts[0].1.clone()).unwrap().starts_with("<svg"));
}

#[test]
fn overrides_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("lemma-fast.toml");
    let prefix = dir.path().join("l");
    let out = qctl(&[
        "lemma-fast",
        "--config",
        cfg.to_str().unwrap(),
        "--epsilon",
        "geomspace(0.2, 0.025, 4)",
        "--alpha",
        "2.0",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let eps = csv_column(&dir.path().join("l.csv"), "epsilon");
    assert_eq!(eps.len(), 4);
    assert!((eps[3] - 0.025).abs() < 1e-15);
}

#[test]
fn vanishing_perturbation_leaves_variation_residual_at_rounding() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[check]\nb_zero = true\npairs = 2\n");
    let prefix = dir.path().join("v");
    let out = qctl(&["variation-check", "--config", &cfg, "--out", prefix.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let res = csv_column(&dir.path().join("v.csv"), "residual");
    assert!(res.iter().all(|&r| r <= 1e-12), "{res:?}");
}
