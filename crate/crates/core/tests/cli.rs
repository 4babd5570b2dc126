use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ssvep(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssvep"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let o = ssvep(&[flag], dir.path());
        assert!(o.status.success(), "{flag}");
        assert!(!o.stdout.is_empty());
    }
    let o = ssvep(&["evaluate", "--help"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("--ablate-rules"));
}

#[test]
fn usage_errors_exit_two_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvep(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
    assert!(stderr(&o).starts_with("error: usage:"));

    let o = ssvep(&["generate", "--out", "ds"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));

    fs::write(
        dir.path().join("bad.toml"),
        "seed = 1\nwindow_seconds = 2.0\n",
    )
    .unwrap();
    let o = ssvep(
        &["generate", "--config", "bad.toml", "--out", "ds"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
    assert!(stderr(&o).contains("window_seconds"), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvep(
        &[
            "baseline",
            "--method",
            "cca",
            "--seed",
            "1",
            "--manifest",
            "missing.toml",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: io:"));
}

#[test]
fn baseline_rejects_the_fuzzy_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvep(
        &[
            "baseline",
            "--method",
            "fuzzy",
            "--seed",
            "1",
            "--manifest",
            "m.toml",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_then_evaluate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = ssvep(
        &[
            "generate",
            "--seed",
            "5",
            "--trials",
            "3",
            "--freqs",
            "8,9,10,11,12,13",
            "--out",
            "ds",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(p.join("ds/run_manifest.json").is_file());

    for out in ["a", "b"] {
        let o = ssvep(
            &[
                "evaluate",
                "--seed",
                "9",
                "--manifest",
                "ds/manifest.toml",
                "--method",
                "fbcca",
                "--repeats",
                "3",
                "--n-source",
                "3",
                "--out",
                out,
            ],
            p,
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(p.join("a/trials.csv")).unwrap();
    let b = fs::read(p.join("b/trials.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8_lossy(&a).starts_with("repeat,trial_id,true_class"));

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(p.join("a/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["method"], "fbcca");
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1 + 6 * 3);
    assert!(inputs
        .iter()
        .all(|i| i["sha256"].as_str().unwrap().len() == 64));
}

#[test]
fn ttest_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssvep(
        &[
            "ttest",
            "--a",
            "1,2,3,4",
            "--b",
            "1.5,2.1,3.9,4.2",
            "--out",
            "t",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let r: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("t/ttest.json")).unwrap()).unwrap();
    // scipy.stats.ttest_rel
    approx::assert_relative_eq!(
        r["t"].as_f64().unwrap(),
        -2.365068368376859,
        max_relative = 1e-9
    );
    approx::assert_relative_eq!(
        r["p"].as_f64().unwrap(),
        0.0989445969540241,
        max_relative = 1e-6
    );
}
