use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowgnn_core::dataset::deserialize_examples;
use flowgnn_model::{ModelConfig, ModelParams};
use flowgnn_tensor::Tensor;
use serde_json::Value;

fn flowgnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowgnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = flowgnn(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CHAIN: &str =
    "define internal i32 @chain(i32 %x) {\n  %a = add i32 %x, 1\n  %b = mul i32 %a, 2\n  ret i32 %b\n}\n";

/// Synthesises `count` programs and builds `corpus.graphs.jsonl` in `dir`.
fn corpus(dir: &Path, count: usize) {
    std::fs::create_dir_all(dir.join("ir")).unwrap();
    ok(
        dir,
        &["synth", "--count", &count.to_string(), "--seed", "5", "--out", "ir"],
    );
    let mut files: Vec<String> = std::fs::read_dir(dir.join("ir"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ll"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    files.sort();
    let mut args = vec!["graph"];
    args.extend(files.iter().map(String::as_str));
    ok(dir, &args);
}

#[test]
fn analyze_reachability_on_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "chain.ll", CHAIN);
    ok(dir.path(), &["parse", "chain.ll"]);
    ok(dir.path(), &["graph", "chain.ll", "--name", "chain", "--dot"]);
    assert!(dir.path().join("chain.dot").exists());
    let out = ok(
        dir.path(),
        &["analyze", "--task", "reachability", "--root", "0", "chain.graphs.jsonl"],
    );
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["positives"], serde_json::json!([0, 1, 2]));
    assert_eq!(v["step_count"], 2);
    let out = ok(
        dir.path(),
        &["analyze", "--task", "reachability", "--root", "2", "chain.graphs.jsonl"],
    );
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["positives"], serde_json::json!([2]));
    assert_eq!(v["step_count"], 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.ll",
        "define i32 @f() {\n  %a = add i32 %zz, 1\n  ret i32 %a\n}\n",
    );
    let out = flowgnn(dir.path(), &["parse", "bad.ll"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.ll:"));

    assert_eq!(flowgnn(dir.path(), &["parse"]).status.code(), Some(1));
    assert_eq!(flowgnn(dir.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(flowgnn(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(
        flowgnn(dir.path(), &["analyze", "--task", "bogus", "--root", "0", "x"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        flowgnn(
            dir.path(),
            &["vocab", "coverage", "--vocab", "missing.txt", "--test", "x"]
        )
        .status
        .code(),
        Some(2)
    );

    // An invalid root is a data error.
    write(dir.path(), "chain.ll", CHAIN);
    ok(dir.path(), &["graph", "chain.ll", "--name", "chain"]);
    let out = flowgnn(
        dir.path(),
        &["analyze", "--task", "liveness", "--root", "4", "chain.graphs.jsonl"],
    );
    assert_eq!(out.status.code(), Some(2));

    ok(dir.path(), &["gradcheck"]);
    assert_eq!(
        flowgnn(dir.path(), &["gradcheck", "--tolerance", "0"]).status.code(),
        Some(3)
    );
}

#[test]
fn ddf_filters_nest_and_jobs_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 40);
    for (out, ddf, jobs) in [("a", "30", "1"), ("b", "60", "1"), ("c", "30", "3")] {
        std::fs::create_dir_all(d.join(out)).unwrap();
        ok(
            d,
            &[
                "dataset",
                "--task",
                "dominance",
                "--ddf-steps",
                ddf,
                "corpus.graphs.jsonl",
                "--seed",
                "2",
                "--jobs",
                jobs,
                "--out",
                out,
            ],
        );
    }
    for split in ["train", "val", "test"] {
        let name = format!("dominance.{split}.jsonl");
        let read = |dir: &str| std::fs::read_to_string(d.join(dir).join(&name)).unwrap();
        assert_eq!(read("a"), read("c"));
        let small = deserialize_examples(&read("a")).unwrap();
        let large = deserialize_examples(&read("b")).unwrap();
        assert!(small.iter().all(|e| large.contains(e)));
    }

    // Graph building with several workers keeps input order.
    let files: Vec<String> = (0..40).map(|i| format!("ir/p{i:05}.ll")).collect();
    let mut args = vec!["graph", "--jobs", "3", "--name", "parallel"];
    args.extend(files.iter().map(String::as_str));
    ok(d, &args);
    assert_eq!(
        std::fs::read(d.join("corpus.graphs.jsonl")).unwrap(),
        std::fs::read(d.join("parallel.graphs.jsonl")).unwrap()
    );
}

#[test]
fn eval_of_a_perfect_checkpoint_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "chain.ll", CHAIN);
    ok(d, &["graph", "chain.ll", "--name", "chain"]);
    ok(d, &["vocab", "--train", "chain.graphs.jsonl"]);
    let cov = ok(
        d,
        &[
            "vocab",
            "coverage",
            "--vocab",
            "vocab.txt",
            "--test",
            "chain.graphs.jsonl",
        ],
    );
    assert!(cov.contains("\"coverage\":1.0"));
    // Every instruction is reachable from the entry.
    write(
        d,
        "ex.jsonl",
        "{\"source_id\":\"chain\",\"task\":\"reachability\",\"root\":0,\"labels\":\"1:3,0:5\",\"step_count\":2}\n",
    );

    // A readout that always prefers the positive class.
    let cfg = ModelConfig {
        d_embed: 4,
        ..ModelConfig::default()
    };
    let vocab =
        flowgnn_core::vocab::Vocabulary::from_text(&std::fs::read_to_string(d.join("vocab.txt")).unwrap()).unwrap();
    let mut p = ModelParams::init(vocab.size(), &cfg, 1);
    p.g_w = Tensor::zeros(&[cfg.d(), 2]);
    p.g_b = Tensor::vector(vec![-1.0, 1.0]);
    p.save(std::fs::File::create(d.join("perfect.ckpt")).unwrap()).unwrap();

    let out = ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "perfect.ckpt",
            "--examples",
            "ex.jsonl",
            "--graphs",
            "chain.graphs.jsonl",
            "--vocab",
            "vocab.txt",
            "--steps",
            "4",
        ],
    );
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["f1"], 1.0);
    assert_eq!(v["counts"]["tp"], 3);

    // Labels that do not cover the graph are a data error.
    write(
        d,
        "short.jsonl",
        "{\"source_id\":\"chain\",\"task\":\"reachability\",\"root\":0,\"labels\":\"1:3\",\"step_count\":2}\n",
    );
    let out = flowgnn(
        d,
        &[
            "eval",
            "--checkpoint",
            "perfect.ckpt",
            "--examples",
            "short.jsonl",
            "--graphs",
            "chain.graphs.jsonl",
            "--vocab",
            "vocab.txt",
            "--steps",
            "4",
        ],
    );
    assert_eq!(out.status.code(), Some(2));

    // A checkpoint built for another vocabulary is refused.
    ModelParams::init(vocab.size() + 1, &cfg, 1)
        .save(std::fs::File::create(d.join("other.ckpt")).unwrap())
        .unwrap();
    let out = flowgnn(
        d,
        &[
            "eval",
            "--checkpoint",
            "other.ckpt",
            "--examples",
            "ex.jsonl",
            "--graphs",
            "chain.graphs.jsonl",
            "--vocab",
            "vocab.txt",
            "--steps",
            "4",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 20);
    std::fs::create_dir_all(d.join("run")).unwrap();
    ok(
        d,
        &[
            "dataset",
            "--task",
            "liveness",
            "--ddf-steps",
            "30",
            "corpus.graphs.jsonl",
            "--seed",
            "9",
            "--out",
            "run",
        ],
    );
    let first = std::fs::read(d.join("run/liveness.train.jsonl")).unwrap();
    std::fs::remove_file(d.join("run/liveness.train.jsonl")).unwrap();
    let echo: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run/dataset.config.json")).unwrap()).unwrap();
    assert_eq!(echo["seed"], 9);
    // Replay from an unrelated directory.
    let elsewhere = tempfile::tempdir().unwrap();
    ok(
        elsewhere.path(),
        &["replay", d.join("run/dataset.config.json").to_str().unwrap()],
    );
    assert_eq!(std::fs::read(d.join("run/liveness.train.jsonl")).unwrap(), first);
}

#[test]
fn train_then_eval_with_parallel_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 30);
    ok(
        d,
        &[
            "dataset",
            "--task",
            "reachability",
            "--ddf-steps",
            "10",
            "corpus.graphs.jsonl",
            "--gzip",
        ],
    );
    write(
        d,
        "run.json",
        r#"{"train": "reachability.train.jsonl.gz", "val": "reachability.val.jsonl.gz", "graphs": ["corpus.graphs.jsonl"],
            "model": {"d_embed": 8, "t_train": 3, "batch_vertices": 400, "validate_every": 40, "learning_rate": 0.002}}"#,
    );
    let out = ok(d, &["train", "--task", "reachability", "--config", "run.json"]);
    assert!(out.contains("best_val_f1"));
    assert!(d.join("reachability.vocab.txt").exists());
    let history = std::fs::read_to_string(d.join("reachability.history.jsonl")).unwrap();
    assert!(history.lines().count() >= 2);
    let eval = |jobs: &str| {
        ok(
            d,
            &[
                "eval",
                "--checkpoint",
                "reachability.ckpt",
                "--examples",
                "reachability.test.jsonl.gz",
                "--graphs",
                "corpus.graphs.jsonl",
                "--vocab",
                "reachability.vocab.txt",
                "--steps",
                "3",
                "--jobs",
                jobs,
            ],
        )
    };
    assert_eq!(eval("1"), eval("2"));

    // A run config for another task is rejected as a data error.
    let out = flowgnn(d, &["train", "--task", "liveness", "--config", "run.json"]);
    assert_eq!(out.status.code(), Some(2));
}
