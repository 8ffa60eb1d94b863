use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use convtopic::cli::split_corpus;
use convtopic::corpus::{
    build_all_examples, parse_corpus, write_corpus, ResponseRatings, Side, SplitName, Task,
};
use convtopic::metrics::{correlate_depth, DepthStatistic};
use convtopic::training::{encode_examples, evaluate, load_model, ActSource};
use serde_json::Value;
use tempfile::TempDir;

fn convtopic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convtopic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = convtopic(args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{args:?}\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn code(args: &[&str]) -> i32 {
    convtopic(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
    corpus: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.jsonl");
        ok(&[
            "synth",
            "--out",
            s(&corpus),
            "--seed",
            "3",
            "--conversations",
            "60",
            "--turns",
            "5",
            "--topics",
            "6",
        ]);
        Workspace { dir, corpus }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, name: &str, extra: &[&str]) -> PathBuf {
        let out = self.path(name);
        let mut args = vec![
            "train",
            "--corpus",
            s(&self.corpus),
            "--out",
            s(&out),
            "--embed-dim",
            "8",
            "--hidden",
            "8",
            "--epochs",
            "2",
            "--seed",
            "7",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        out
    }
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<Vec<u8>> = ["a", "b", "c"]
        .iter()
        .zip(["1", "1", "2"])
        .map(|(name, seed)| {
            let p = dir.path().join(name);
            ok(&[
                "synth",
                "--out",
                s(&p),
                "--seed",
                seed,
                "--conversations",
                "10",
            ]);
            fs::read(p).unwrap()
        })
        .collect();
    assert_eq!(files[0], files[1]);
    assert_ne!(files[0], files[2]);
}

#[test]
fn train_and_eval_agree_with_the_library() {
    let ws = Workspace::new();
    let before = fs::read(&ws.corpus).unwrap();
    let model_path = ws.train("dan.bin", &["--context", "avg"]);
    assert_eq!(fs::read(&ws.corpus).unwrap(), before);

    let printed = ok(&["eval", "--corpus", s(&ws.corpus), "--model", s(&model_path)]);
    let model = load_model(&model_path).unwrap();
    let convs = parse_corpus(&ws.corpus).unwrap();
    let test = split_corpus(&convs, 7, SplitName::Test).unwrap();
    let cfg = model.model.config();
    let examples = build_all_examples(&test, Task::Topic, Side::User, cfg.window);
    let encoded = encode_examples(&examples, &model.vocab, ActSource::None, None).unwrap();
    let report = evaluate(&model.model, &encoded)
        .unwrap()
        .to_report(&Task::Topic.label_names());
    assert_eq!(printed, format!("{}\n", report.to_json()));

    let table = ok(&[
        "eval",
        "--corpus",
        s(&ws.corpus),
        "--model",
        s(&model_path),
        "--format",
        "table",
    ]);
    assert_eq!(table, report.to_table());
}

#[test]
fn keywords_with_gold_count_balance_precision_and_recall() {
    let ws = Workspace::new();
    let model = ws.train("adan.bin", &["--model", "adan", "--side", "both"]);
    let printed = ok(&[
        "keywords",
        "--corpus",
        s(&ws.corpus),
        "--model",
        s(&model),
        "--side",
        "both",
        "--j-from-gold",
    ]);
    let lines: Vec<&str> = printed.lines().collect();
    let summary: Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    let n = summary["examples"].as_u64().unwrap() as usize;
    assert!(n > 0);
    assert_eq!(n, lines.len() - 1);
    assert_eq!(summary["keyword_precision"], summary["keyword_recall"]);
    for line in &lines[..lines.len() - 1] {
        let v: Value = serde_json::from_str(line).unwrap();
        let gold = v["gold"].as_array().unwrap().len();
        assert_eq!(v["positions"].as_array().unwrap().len(), gold);
    }
}

#[test]
fn predict_covers_every_utterance() {
    let ws = Workspace::new();
    let act = ws.train(
        "act.bin",
        &["--task", "act", "--side", "both", "--context", "avg"],
    );
    let topic = ws.train(
        "topic.bin",
        &[
            "--model",
            "adan",
            "--acts",
            "predicted",
            "--act-model",
            s(&act),
            "--context",
            "avg",
        ],
    );
    let printed = ok(&[
        "predict",
        "--corpus",
        s(&ws.corpus),
        "--model",
        s(&topic),
        "--act-model",
        s(&act),
        "--j",
        "2",
    ]);
    let convs = parse_corpus(&ws.corpus).unwrap();
    let utterances: usize = convs.iter().map(|c| 2 * c.turns.len()).sum();
    assert_eq!(printed.lines().count(), utterances);
    for line in printed.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["topic"].is_string() && v["act"].is_string());
        assert!(v["keywords"].as_array().unwrap().len() <= 2);
    }
    let again = ok(&[
        "predict",
        "--corpus",
        s(&ws.corpus),
        "--model",
        s(&topic),
        "--act-model",
        s(&act),
        "--j",
        "2",
    ]);
    assert_eq!(printed, again);
}

#[test]
fn metrics_report_depth_correlations() {
    let ws = Workspace::new();
    let mut convs = parse_corpus(&ws.corpus).unwrap();
    for (i, conv) in convs.iter_mut().enumerate() {
        for (t, turn) in conv.turns.iter_mut().enumerate() {
            let bit = |k: usize| u8::from(!(i + t + k).is_multiple_of(3));
            turn.chatbot.ratings = Some(ResponseRatings {
                comprehensible: bit(0),
                relevant: bit(1),
                interesting: bit(2),
                continue_conversation: 1,
            });
        }
    }
    let rated = ws.path("rated.jsonl");
    write_corpus(&rated, &convs).unwrap();
    let printed = ok(&["metrics", "--corpus", s(&rated), "--statistic", "max"]);
    let v: Value = serde_json::from_str(printed.trim()).unwrap();
    let expected = correlate_depth(&convs, DepthStatistic::Max, true).unwrap();
    let got = v["correlations"].as_array().unwrap();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(&expected) {
        assert_eq!(g["name"].as_str().unwrap(), e.name);
        assert!((g["r"].as_f64().unwrap() - e.r).abs() < 1e-12);
    }
    assert_eq!(v["depth"]["conversations"].as_u64(), Some(60));

    let unrated = ok(&["metrics", "--corpus", s(&ws.corpus)]);
    let v: Value = serde_json::from_str(unrated.trim()).unwrap();
    assert!(v.get("correlations").is_none());
}

#[test]
fn kappa_of_a_corpus_with_itself_is_one() {
    let ws = Workspace::new();
    for task in ["topic", "act"] {
        let printed = ok(&[
            "kappa",
            "--corpus",
            s(&ws.corpus),
            "--other",
            s(&ws.corpus),
            "--task",
            task,
        ]);
        let v: Value = serde_json::from_str(printed.trim()).unwrap();
        assert_eq!(v["kappa"].as_f64(), Some(1.0));
        assert!(v["items"].as_u64().unwrap() > 0);
    }
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let ws = Workspace::new();
    let c = s(&ws.corpus);
    assert_eq!(code(&["train", "--corpus", c]), 1);
    assert_eq!(code(&["eval", "--bogus"]), 1);
    assert_eq!(
        code(&[
            "train",
            "--corpus",
            c,
            "--out",
            "/dev/null",
            "--context",
            "seq"
        ]),
        1
    );
    assert_eq!(
        code(&[
            "train",
            "--corpus",
            "/nonexistent/corpus.jsonl",
            "--out",
            s(&ws.path("x"))
        ]),
        2
    );
    let garbage = ws.path("garbage.jsonl");
    fs::write(&garbage, "{not json\n").unwrap();
    assert_eq!(code(&["metrics", "--corpus", s(&garbage)]), 2);

    let vectors: String = [
        "yes", "sure", "tell", "more", "okay", "go", "on", "what", "about", "that",
    ]
    .iter()
    .map(|w| format!("{w} nan nan nan nan\n"))
    .collect();
    let vec_path = ws.path("vectors.txt");
    fs::write(&vec_path, vectors).unwrap();
    let o = convtopic(&[
        "train",
        "--corpus",
        c,
        "--out",
        s(&ws.path("nan.bin")),
        "--embed-dim",
        "4",
        "--hidden",
        "4",
        "--epochs",
        "1",
        "--pretrained",
        s(&vec_path),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn mismatched_vocabularies_are_rejected() {
    let ws = Workspace::new();
    let other = ws.path("other.jsonl");
    ok(&[
        "synth",
        "--out",
        s(&other),
        "--seed",
        "99",
        "--conversations",
        "40",
        "--topics",
        "12",
    ]);
    let act = ws.train("act.bin", &["--task", "act", "--side", "both"]);
    let topic_out = ws.path("topic.bin");
    ok(&[
        "train",
        "--corpus",
        s(&other),
        "--out",
        s(&topic_out),
        "--embed-dim",
        "8",
        "--hidden",
        "8",
        "--epochs",
        "1",
    ]);
    let o = convtopic(&[
        "predict",
        "--corpus",
        s(&ws.corpus),
        "--model",
        s(&topic_out),
        "--act-model",
        s(&act),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vocabulary mismatch"));
}
