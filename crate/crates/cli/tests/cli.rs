use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn myoaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myoaudit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_args(out: &str) -> Vec<&str> {
    vec!["--out", out, "--jobs", "1"]
}

#[test]
fn run_twice_second_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = smoke();
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend(small_args(out.to_str().unwrap()));
    args.push("run");
    let first = myoaudit(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stdout(&first).matches(" ran ").count(), 8, "{}", stdout(&first));
    let second = myoaudit(&args);
    assert!(second.status.success());
    assert_eq!(stdout(&second).matches(" cached ").count(), 8, "{}", stdout(&second));
    assert!(out.join("figures/fig4_cim.svg").is_file());
}

#[test]
fn intermediate_subcommands_stop_at_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = smoke();
    let base = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let run = |cmd: &str| {
        let mut a = base.clone();
        a.push(cmd);
        myoaudit(&a)
    };
    let o = run("impute");
    assert!(o.status.success());
    assert!(out.join("demographics_imputed.csv").is_file());
    assert!(!out.join("features.csv").exists());
    let o = run("fit");
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("impute   cached"), "{text}");
    assert!(text.contains("fit      ran"), "{text}");
    assert!(!out.join("sensitivity.csv").exists());
}

#[test]
fn synth_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let o = myoaudit(&[
        "--out",
        out.to_str().unwrap(),
        "synth",
        "--subjects",
        "16",
        "--gestures",
        "2",
        "--channels",
        "2",
        "--trial-length",
        "400",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = out.join("synth_data/manifest.json");
    assert!(manifest.is_file());
    assert!(out.join("synth_data/ground_truth.json").is_file());

    let out2 = dir.path().join("fit");
    let o = myoaudit(&["--dataset", manifest.to_str().unwrap(), "--out", out2.to_str().unwrap(), "extract"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out2.join("features.csv").is_file());
}

fn without_demographics(root: &Path) -> PathBuf {
    let gen = root.join("gen");
    let o = myoaudit(&["--out", gen.to_str().unwrap(), "synth", "--subjects", "4", "--gestures", "1", "--channels", "2", "--trial-length", "300"]);
    assert!(o.status.success());
    fs::remove_file(gen.join("synth_data/demographics.csv")).unwrap();
    gen.join("synth_data/manifest.json")
}

#[test]
fn missing_demographics_exits_with_data_error_and_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = without_demographics(dir.path());
    let out = dir.path().join("out");
    let o = myoaudit(&["--dataset", manifest.to_str().unwrap(), "--out", out.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ingest"), "{err}");
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = myoaudit(&["--out", dir.path().to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "window_fraction = 1.5\n[synth]\nn_subjects = 20\n").unwrap();
    let o = myoaudit(&["--config", bad.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window_fraction"));

    let o = myoaudit(&["--config", dir.path().join("absent.toml").to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
}
