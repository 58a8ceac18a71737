use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mindgauge::corpus::write_jsonl;
use mindgauge::synth::{planted_corpus, SynthConfig};
use mindgauge_cli::dispatch;

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn run(args: &[&str]) -> i32 {
    dispatch(args.iter().map(|a| a.to_string()))
}

fn write_corpus(dir: &Path) -> PathBuf {
    let posts = planted_corpus(&SynthConfig {
        docs_per_class: 20,
        ..SynthConfig::default()
    });
    let p = dir.join("curated.jsonl");
    fs::write(&p, write_jsonl(&posts).unwrap()).unwrap();
    p
}

fn write_small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(
        &p,
        "model = \"lstm\"\ninput_kind = \"posts\"\nmax_len = 32\nembedding_dim = 8\nhidden_dim = 8\nnum_layers = 1\nepochs = 2\nbatch_size = 16\n",
    )
    .unwrap();
    p
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["train", "--bogus"]), 2);
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(run(&["ingest", "--in", &s(&missing), "--out", &s(&dir.path().join("c.jsonl"))]), 3);
}

#[test]
fn binary_prints_one_json_error_line() {
    let out = Command::new(env!("CARGO_BIN_EXE_mindgauge"))
        .args(["stats", "--in", "/definitely/not/here.jsonl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "missing_input");
}

#[test]
fn ingest_fixture_is_reproducible_and_leaves_input_alone() {
    let dir = tempfile::tempdir().unwrap();
    let raw_src = fs::read(core_fixture("raw_60.jsonl")).unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::write(&raw, &raw_src).unwrap();
    let out = dir.path().join("curated.jsonl");
    assert_eq!(run(&["ingest", "--in", &s(&raw), "--out", &s(&out)]), 0);
    let first = fs::read(&out).unwrap();
    let rejects = fs::read(dir.path().join("rejects.jsonl")).unwrap();
    assert!(dir.path().join("curated.jsonl.manifest.json").exists());

    let ids: Vec<String> = String::from_utf8(first.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_owned())
        .collect();
    let expected = fs::read_to_string(core_fixture("expected_curated_ids.txt")).unwrap();
    assert_eq!(ids, expected.lines().collect::<Vec<_>>());
    let n_rejects = String::from_utf8(rejects.clone()).unwrap().lines().count();
    assert_eq!(ids.len() + n_rejects, 60);

    assert_eq!(run(&["ingest", "--in", &s(&raw), "--out", &s(&out)]), 0);
    assert_eq!(fs::read(&out).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("rejects.jsonl")).unwrap(), rejects);
    assert_eq!(fs::read(&raw).unwrap(), raw_src);

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("curated.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "ingest");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn refuses_to_overwrite_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::copy(core_fixture("raw_60.jsonl"), &raw).unwrap();
    assert_eq!(run(&["ingest", "--in", &s(&raw), "--out", &s(&raw)]), 2);
    assert_eq!(fs::read(&raw).unwrap(), fs::read(core_fixture("raw_60.jsonl")).unwrap());
}

#[test]
fn stats_match_frozen_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let curated = dir.path().join("curated.jsonl");
    assert_eq!(run(&["ingest", "--in", &s(&core_fixture("raw_60.jsonl")), "--out", &s(&curated)]), 0);
    let out = dir.path().join("stats");
    assert_eq!(run(&["stats", "--in", &s(&curated), "--out", &s(&out), "--cosine", "f000,f000"]), 0);
    assert_eq!(
        fs::read_to_string(out.join("stats.csv")).unwrap(),
        fs::read_to_string(core_fixture("expected_stats.csv")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(out.join("cooccurrence.csv")).unwrap(),
        fs::read_to_string(core_fixture("expected_cooccurrence.csv")).unwrap()
    );
    let cos: serde_json::Value = serde_json::from_slice(&fs::read(out.join("cosine.json")).unwrap()).unwrap();
    assert_eq!(cos["cosine"], 1.0);
    assert_eq!(run(&["stats", "--in", &s(&curated), "--out", &s(&out), "--cosine", "f000"]), 2);
}

#[test]
fn train_twice_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path());
    let cfg = write_small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(run(&["train", "--in", &s(&corpus), "--config", &s(&cfg), "--seed", "7", "--out", &s(out)]), 0);
    }
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
    assert_eq!(fs::read(a.join("model.json")).unwrap(), fs::read(b.join("model.json")).unwrap());
    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,train_loss,val_acc\n"));

    let c = dir.path().join("c");
    assert_eq!(run(&["train", "--in", &s(&corpus), "--config", &s(&cfg), "--seed", "8", "--out", &s(&c)]), 0);
    assert_ne!(fs::read(a.join("model.json")).unwrap(), fs::read(c.join("model.json")).unwrap());
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = write_corpus(d);
    let cfg = write_small_config(d);
    let split = d.join("split.json");
    assert_eq!(run(&["split", "--in", &s(&corpus), "--out", &s(&split), "--seed", "3"]), 0);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(&split).unwrap()).unwrap();
    assert_eq!(manifest["test"].as_array().unwrap().len(), 12);

    let mut reports = Vec::new();
    for (model, kind) in [("lstm", "posts"), ("lstm", "titles"), ("transformer", "posts")] {
        let out = d.join(format!("{model}-{kind}"));
        let code = run(&[
            "train", "--in", &s(&corpus), "--split", &s(&split), "--config", &s(&cfg), "--model", model,
            "--input-kind", kind, "--out", &s(&out),
        ]);
        assert_eq!(code, 0);
        let ev = d.join(format!("eval-{model}-{kind}"));
        let code = run(&[
            "eval", "--checkpoint", &s(&out.join("model.json")), "--in", &s(&corpus), "--split", &s(&split), "--out",
            &s(&ev),
        ]);
        assert_eq!(code, 0);
        let confusion = fs::read_to_string(ev.join("confusion.csv")).unwrap();
        assert_eq!(confusion.lines().count(), 7);
        assert!(ev.join("summary.txt").exists());
        reports.push(s(&ev.join("report.json")));
    }

    let bh = d.join("behave");
    let ck = d.join("lstm-posts/model.json");
    let args = [
        "behave", "--checkpoint", &s(&ck), "--in", &s(&corpus), "--split", &s(&split), "--modes",
        "remove_label,replace_random", "--fractions", "0.5,1.0", "--seed", "4", "--dump", "--out", &s(&bh),
    ];
    assert_eq!(run(&args), 0);
    let csv = fs::read_to_string(bh.join("behavior_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1 + 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("clean,posts"));
    let first = fs::read(bh.join("behavior_report.csv")).unwrap();
    assert_eq!(run(&args), 0);
    assert_eq!(fs::read(bh.join("behavior_report.csv")).unwrap(), first);
    assert_eq!(fs::read_to_string(bh.join("perturbed.jsonl")).unwrap().lines().count(), 4 * 12);

    let only_clean = d.join("behave-clean");
    let code = run(&[
        "behave", "--checkpoint", &s(&ck), "--in", &s(&corpus), "--split", &s(&split), "--modes", "--out",
        &s(&only_clean),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(only_clean.join("behavior_report.csv")).unwrap().lines().count(), 2);

    let rep = d.join("report");
    assert_eq!(run(&["report", "--in", &reports.join(","), "--out", &s(&rep)]), 0);
    let table = fs::read_to_string(rep.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3);
    let txt = fs::read_to_string(rep.join("table.txt")).unwrap();
    assert!(txt.lines().next().unwrap().contains("posts") && txt.contains("titles"));
}

#[test]
fn data_dir_roots_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(core_fixture("raw_60.jsonl"), dir.path().join("raw.jsonl")).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_mindgauge"))
        .arg("ingest")
        .env("MINDGAUGE_DATA_DIR", dir.path())
        .current_dir(std::env::temp_dir())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("curated.jsonl").exists());
    assert!(dir.path().join("rejects.jsonl").exists());
}
