use std::path::Path;
use std::process::{Command, Output};

fn ementa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ementa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ementa(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = ementa(dir.path(), &["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["synth", "ingest", "stats", "adjust", "split", "train", "grid", "baseline", "report"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn bad_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!ementa(dir.path(), &["frobnicate"]).status.success());
    let out = ementa(dir.path(), &["stats", "--corpus", "absent.jsonl", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("absent.jsonl"), "{err}");
    assert!(!ementa(dir.path(), &["stats", "--out", "s.json"]).status.success());
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["synth", "--seed", "7", "--n-docs", "50", "--out", "a.jsonl"]);
    ok(p, &["synth", "--seed", "7", "--n-docs", "50", "--out", "b.jsonl"]);
    ok(p, &["synth", "--seed", "8", "--n-docs", "50", "--out", "c.jsonl"]);
    let read = |f: &str| std::fs::read(p.join(f)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
    assert_eq!(String::from_utf8(read("a.jsonl")).unwrap().lines().count(), 50);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("cfg.toml"), "[synth]\nn_docs = 30\nseed = 7\nout = \"file.jsonl\"\n").unwrap();
    ok(p, &["--config", "cfg.toml", "synth"]);
    ok(p, &["--config", "cfg.toml", "synth", "--n-docs", "40", "--out", "flag.jsonl"]);
    let lines = |f: &str| std::fs::read_to_string(p.join(f)).unwrap().lines().count();
    assert_eq!(lines("file.jsonl"), 30);
    assert_eq!(lines("flag.jsonl"), 40);

    std::fs::write(p.join("bad.toml"), "[synth]\nn_dcos = 30\n").unwrap();
    let out = ementa(p, &["--config", "bad.toml", "synth", "--out", "x.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("n_dcos"));
}

#[test]
fn pipeline_produces_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["synth", "--seed", "3", "--n-docs", "1000", "--out", "c.jsonl"]);
    ok(p, &["stats", "--corpus", "c.jsonl", "--out", "stats.json"]);
    ok(p, &["adjust", "--corpus", "c.jsonl", "--variant", "2", "--hierarchy", "h.json", "--out", "v2.jsonl"]);
    ok(p, &["split", "--dataset", "v2.jsonl", "--out-dir", "sp", "--seed", "1"]);
    for f in ["sp/train.jsonl", "sp/validation.jsonl", "sp/test.jsonl", "h.json", "stats.json"] {
        assert!(p.join(f).exists(), "{f}");
    }
    let model = ["--model-dim", "16", "--ff-dim", "32", "--layers", "1", "--heads", "2", "--epochs", "1"];
    let mut args = vec!["train", "--splits", "sp", "--name", "v2", "--out", "row.json"];
    args.extend(model);
    ok(p, &args);
    ok(p, &["baseline", "--splits", "sp", "--name", "v2", "--out", "base.json"]);
    ok(p, &["report", "--results", "row.json", "--baseline", "base.json", "--out-dir", "rep"]);
    let t2 = std::fs::read_to_string(p.join("rep/table2.csv")).unwrap();
    assert_eq!(t2.lines().count(), 3, "{t2}");
    assert!(p.join("rep/table1.txt").exists());
}
