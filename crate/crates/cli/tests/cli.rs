use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affordsim::eval::{read_results, EpisodeResult};
use affordsim::task::Mode;

const BIN: &str = env!("CARGO_BIN_EXE_affordsim");

fn affordsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("AFFORDSIM_ENDPOINT").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = affordsim(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path) -> PathBuf {
    let cfg = dir.join("config.json");
    fs::write(&cfg, r#"{"n_demos": 30, "n_scenes_seen": 3, "n_scenes_unseen": 2, "seed": 11}"#).unwrap();
    let ds = dir.join("ds");
    let stdout = ok(&["gen", "--config", p(&cfg), "--out", p(&ds)]);
    assert!(stdout.starts_with("event=generated "), "{stdout}");
    ds
}

fn run(ds: &Path, out: &Path, extra: &[&str]) -> Vec<EpisodeResult> {
    let mut args = vec!["run", "--dataset", p(ds), "--out", p(out)];
    args.extend_from_slice(extra);
    let stdout = ok(&args);
    assert!(stdout.lines().all(|l| l.starts_with("event=")), "{stdout}");
    read_results(&out.join("results.jsonl")).unwrap()
}

fn dynamic_successes(results: &[EpisodeResult]) -> Vec<bool> {
    results.iter().filter(|r| r.mode == Mode::Dynamic).map(|r| r.success).collect()
}

#[test]
fn pipeline_generates_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path());
    let adapt = run(&ds, &dir.path().join("adapt"), &["--policy", "adapt", "--reasoner", "oracle"]);
    let vanilla = run(&ds, &dir.path().join("vanilla"), &["--policy", "vanilla"]);
    assert_eq!(adapt.len(), 30);
    assert!(adapt.iter().all(|r| r.success));
    let sr = |v: &[bool]| v.iter().filter(|&&s| s).count();
    assert!(sr(&dynamic_successes(&adapt)) > sr(&dynamic_successes(&vanilla)));

    let results = dir.path().join("adapt/results.jsonl");
    let md = ok(&["eval", "--results", p(&results), "--format", "md"]);
    assert!(md.lines().next().unwrap().ends_with("| GC | PLW GC | SR | PLW SR |"));
    let csv = ok(&["eval", "--results", p(&results), "--format", "csv", "--group", "mode"]);
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn runs_are_reproducible_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path());
    let args = ["--policy", "adapt", "--reasoner", "noisy", "--accuracy", "0.75", "--seed", "4"];
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    run(&ds, &one, &[&args[..], &["--parallel", "1"]].concat());
    run(&ds, &many, &[&args[..], &["--parallel", "3"]].concat());
    assert_eq!(fs::read(one.join("results.jsonl")).unwrap(), fs::read(many.join("results.jsonl")).unwrap());
    for entry in fs::read_dir(one.join("trajectories")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = fs::read(one.join("trajectories").join(&name)).unwrap();
        let b = fs::read(many.join("trajectories").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn stub_reasoners_over_child_pipes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path());
    let oracle = run(&ds, &dir.path().join("oracle"), &["--policy", "adapt", "--reasoner", "oracle"]);
    let vanilla = run(&ds, &dir.path().join("vanilla"), &["--policy", "vanilla"]);

    let loopback = format!("cmd:{BIN} stub-reasoner --mode oracle --listen stdio");
    let ext = dir.path().join("loopback");
    let remote =
        run(&ds, &ext, &["--policy", "adapt", "--reasoner", "external", "--endpoint", &loopback, "--share-latent"]);
    assert_eq!(dynamic_successes(&remote), dynamic_successes(&oracle));
    for r in &oracle {
        let name = format!("{}.jsonl", r.episode_id);
        let a = fs::read(dir.path().join("oracle/trajectories").join(&name)).unwrap();
        let b = fs::read(ext.join("trajectories").join(&name)).unwrap();
        assert_eq!(a, b, "{name}");
    }

    let always = format!("cmd:{BIN} stub-reasoner --mode always-available --listen stdio");
    let blind =
        run(&ds, &dir.path().join("always"), &["--policy", "adapt", "--reasoner", "external", "--endpoint", &always]);
    assert_eq!(dynamic_successes(&blind), dynamic_successes(&vanilla));
}

#[test]
fn replay_accepts_recorded_traces_and_rejects_tampered_ones() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path());
    let out = dir.path().join("adapt");
    let results = run(&ds, &out, &["--policy", "adapt", "--reasoner", "oracle"]);
    let id = &results.iter().find(|r| r.mode == Mode::Dynamic).unwrap().episode_id;
    let trace = out.join("trajectories").join(format!("{id}.jsonl"));
    let stdout = ok(&["replay", "--dataset", p(&ds), "--episode", id, "--trace", p(&trace)]);
    assert!(stdout.contains("success=true"), "{stdout}");

    let text = fs::read_to_string(&trace).unwrap();
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(&tampered, text.replacen("\"observation_digest\":\"", "\"observation_digest\":\"0", 1)).unwrap();
    let out = affordsim(&["replay", "--dataset", p(&ds), "--episode", id, "--trace", p(&tampered)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validation_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_demos": 10, "static_fraction": "half"}"#).unwrap();
    let out = affordsim(&["gen", "--config", p(&bad), "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("static_fraction"));

    let ds = generate(dir.path());
    let x = dir.path().join("x");
    let missing_endpoint =
        affordsim(&["run", "--dataset", p(&ds), "--policy", "adapt", "--reasoner", "external", "--out", p(&x)]);
    assert_eq!(missing_endpoint.status.code(), Some(2));
    let bad_accuracy = affordsim(&[
        "run",
        "--dataset",
        p(&ds),
        "--policy",
        "adapt",
        "--reasoner",
        "noisy",
        "--accuracy",
        "0.3",
        "--out",
        p(&x),
    ]);
    assert_eq!(bad_accuracy.status.code(), Some(2));
    let unknown_policy = affordsim(&["run", "--dataset", p(&ds), "--policy", "greedy", "--out", p(&x)]);
    assert_eq!(unknown_policy.status.code(), Some(2));
}
