use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

use metaphor_core::layers::{Init, Parameterized};
use metaphor_core::models::{Model, ModelConfig, Task};
use serde_json::Value;

const WORDS: [&str; 8] = ["the", "storm", "drowned", "sank", "hopes", "ship", "he", "debt"];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metaphor"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        let vectors: Vec<String> = WORDS
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let v: Vec<String> = (0..4).map(|j| format!("{:.2}", ((i * 4 + j) as f64 * 0.37).sin())).collect();
                format!("{w} {}", v.join(" "))
            })
            .collect();
        f.write("vectors.txt", &vectors.join("\n"));

        let mut seq = Vec::new();
        let mut csv = vec!["id,genre,tokens,pos,verb_index,label".to_string()];
        let mut ctx = Vec::new();
        for i in 0..12 {
            let tokens: Vec<&str> = (0..4).map(|j| WORDS[(i * 3 + j * 5) % WORDS.len()]).collect();
            let labels: Vec<u8> = tokens.iter().map(|t| u8::from(*t == "drowned" || *t == "sank")).collect();
            let genre = ["academic", "conversation", "fiction", "news"][i % 4];
            let pos = ["DET", "NOUN", "VERB", "NOUN"];
            seq.push(
                serde_json::json!({"id": format!("s{i}"), "genre": genre, "tokens": tokens, "pos": pos, "labels": labels})
                    .to_string(),
            );
            let target = 2;
            csv.push(format!(
                "s{i},{genre},{},{},{target},{}",
                tokens.join(" "),
                pos.join(" "),
                labels[target]
            ));
            let rows: Vec<Vec<f64>> = (0..4).map(|j| (0..3).map(|k| ((i + j + k) as f64).cos()).collect()).collect();
            ctx.push(serde_json::json!({"id": format!("s{i}"), "vectors": rows}).to_string());
        }
        f.write("train.jsonl", &seq.join("\n"));
        f.write("dev.jsonl", &seq[..4].join("\n"));
        f.write("train.csv", &csv.join("\n"));
        f.write("ctx.jsonl", &ctx.join("\n"));
        f.write("empty.jsonl", "");
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn write(&self, name: &str, text: &str) {
        std::fs::write(self.path(name), text).unwrap();
    }

    fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_slice(&self.read(name)).unwrap()
    }

    fn small_flags(&self) -> Vec<String> {
        [
            "--embeddings",
            &self.p("vectors.txt"),
            "--word-dim",
            "4",
            "--contextual-dim",
            "3",
            "--hidden-dim",
            "4",
            "--ff-hidden-dim",
            "4",
            "--index-dim",
            "2",
            "--epochs",
            "2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    fn train(&self, task: &str, data: &str, out: &str, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec![
            "train".into(),
            "--task".into(),
            task.into(),
            "--data".into(),
            self.p(data),
            "--out".into(),
            self.p(out),
        ];
        args.extend(self.small_flags());
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&refs)
    }
}

#[test]
fn train_writes_checkpoint_history_and_report() {
    let f = Fixture::new();
    let dev = f.p("dev.jsonl");
    let out = f.train("seq", "train.jsonl", "m.ckpt", &["--dev", &dev, "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(f.path("m.ckpt").is_file());
    let history = String::from_utf8(f.read("m.ckpt.history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,dev_f1\n"));
    let report = f.json("m.ckpt.report.json");
    assert_eq!(report["settings"]["seed"], 3);
    assert_eq!(report["settings"]["model"]["hidden_dim"], 4);
    assert_eq!(report["dev_size"], 4);
    assert!(report["dev"]["overall"]["f1"].is_number());
}

#[test]
fn missing_data_is_a_usage_error() {
    let out = run(&["train", "--task", "seq"]);
    assert_eq!(code(&out), 2);
    let out = run(&["train", "--data", "/nonexistent/file.jsonl"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let out = run(&["train", "--data", "x.jsonl", "--task", "tree"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let f = Fixture::new();
    let ctx = f.p("ctx.jsonl");
    for task in ["seq", "cls"] {
        let data = if task == "seq" { "train.jsonl" } else { "train.csv" };
        let a = format!("{task}-a.ckpt");
        let b = format!("{task}-b.ckpt");
        let c = format!("{task}-c.ckpt");
        for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
            let o = f.train(task, data, out, &["--seed", seed, "--contextual", &ctx]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
        assert_eq!(f.read(&a), f.read(&b));
        assert_eq!(f.read(&format!("{a}.report.json")), f.read(&format!("{b}.report.json")));
        assert_eq!(f.read(&format!("{a}.history.csv")), f.read(&format!("{b}.history.csv")));
        assert_ne!(f.read(&a), f.read(&c));
    }
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let f = Fixture::new();
    f.write("run.conf", "# small run\nhidden_dim = 3\nseed = 5\npatience = 1\n");
    let conf = f.p("run.conf");
    let out = f.train("seq", "train.jsonl", "c.ckpt", &["--config", &conf, "--seed", "6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let settings = &f.json("c.ckpt.report.json")["settings"];
    assert_eq!(settings["seed"], 6);
    assert_eq!(settings["train"]["patience"], 1);
    assert_eq!(settings["model"]["hidden_dim"], 4);
    assert_eq!(settings["model"]["index_dim"], 2);
    assert_eq!(settings["train"]["optimizer"], "adam");

    f.write("bad.conf", "hiden_dim = 3\n");
    let bad = f.p("bad.conf");
    let out = f.train("seq", "train.jsonl", "d.ckpt", &["--config", &bad]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("hiden_dim"));
}

#[test]
fn eval_reports_are_stable_and_complete() {
    let f = Fixture::new();
    assert_eq!(code(&f.train("seq", "train.jsonl", "m.ckpt", &[])), 0);
    let emb = f.p("vectors.txt");
    let (m, d) = (f.p("m.ckpt"), f.p("train.jsonl"));
    for name in ["r1.json", "r2.json"] {
        let out = run(&["eval", "--model", &m, "--data", &d, "--embeddings", &emb, "--out", &f.p(name)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("overall"));
    }
    assert_eq!(f.read("r1.json"), f.read("r2.json"));
    let r = f.json("r1.json");
    assert_eq!(r["level"], "tokens");
    for key in ["tp", "fp", "fn", "tn", "precision", "recall", "f1", "accuracy"] {
        assert!(r["report"]["overall"][key].is_number(), "missing {key}");
    }
    assert_eq!(r["report"]["by_genre"].as_object().unwrap().len(), 4);
    assert!(r["report"]["macro_f1"].is_number());
    assert!(r["report"]["by_pos"]["VERB"].is_object());
    assert!(r["pos_breakdown"].is_array());
    assert_eq!(r["checkpoint"]["model"]["hidden_dim"], 4);
}

#[test]
fn eval_perfect_model_prints_unit_f1() {
    let f = Fixture::new();
    // A zero model whose output bias always favours the metaphor class.
    let config = ModelConfig {
        word_dim: 4,
        contextual_dim: 3,
        index_dim: 2,
        hidden_dim: 2,
        ff_hidden_dim: 2,
        ..ModelConfig::new(Task::Cls)
    };
    let model = Model::<f64>::new(config, Init::Zeros, 0).unwrap();
    let params: HashMap<String, _> = model.named_params().into_iter().collect();
    params["head.output.bias"].data_mut()[1] = 1.0;
    model.to_checkpoint(Default::default()).unwrap().save(f.path("always.ckpt")).unwrap();
    let rows: Vec<String> = std::iter::once("id,genre,tokens,pos,verb_index,label".to_string())
        .chain((0..5).map(|i| format!("m{i},news,he drowned in debt,,1,1")))
        .collect();
    f.write("metaphors.csv", &rows.join("\n"));
    let out = run(&["eval", "--model", &f.p("always.ckpt"), "--data", &f.p("metaphors.csv"), "--out", &f.p("p.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let overall = stdout(&out).lines().find(|l| l.starts_with("overall")).unwrap().to_string();
    assert_eq!(overall.split_whitespace().collect::<Vec<_>>(), ["overall", "5", "1.000", "1.000", "1.000", "1.000"]);
}

#[test]
fn eval_dimension_mismatch_is_a_runtime_error() {
    let f = Fixture::new();
    assert_eq!(code(&f.train("seq", "train.jsonl", "m.ckpt", &[])), 0);
    let wide: Vec<String> = WORDS.iter().map(|w| format!("{w} 0.1 0.2 0.3 0.4 0.5")).collect();
    f.write("wide.txt", &wide.join("\n"));
    let out = run(&[
        "eval",
        "--model",
        &f.p("m.ckpt"),
        "--data",
        &f.p("train.jsonl"),
        "--embeddings",
        &f.p("wide.txt"),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("expected 4 values, found 5"), "{}", stderr(&out));
}

#[test]
fn baseline_train_equals_test_matches_counting() {
    let f = Fixture::new();
    let out = run(&["baseline", "--train", &f.p("train.jsonl"), "--test", &f.p("train.jsonl"), "--out", &f.p("b.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = f.json("b.json");

    // Independent count over the same file.
    let text = String::from_utf8(f.read("train.jsonl")).unwrap();
    let mut counts: HashMap<String, (u64, u64)> = HashMap::new();
    let mut tokens = Vec::new();
    for line in text.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        for (t, l) in rec["tokens"].as_array().unwrap().iter().zip(rec["labels"].as_array().unwrap()) {
            let t = t.as_str().unwrap().to_lowercase();
            let l = l.as_u64().unwrap();
            let e = counts.entry(t.clone()).or_default();
            if l == 1 {
                e.0 += 1
            } else {
                e.1 += 1
            }
            tokens.push((t, l));
        }
    }
    let metaphors = tokens.iter().filter(|(_, l)| *l == 1).count() as f64;
    let hits = tokens
        .iter()
        .filter(|(t, l)| *l == 1 && counts[t].0 > counts[t].1)
        .count() as f64;
    assert_eq!(r["report"]["overall"]["recall"].as_f64().unwrap(), hits / metaphors);

    let out = run(&["baseline", "--train", &f.p("train.jsonl"), "--test", &f.p("empty.jsonl"), "--out", &f.p("e.json")]);
    assert_eq!(code(&out), 1);
}

#[test]
fn cv_runs_k_folds_and_rejects_k_one() {
    let f = Fixture::new();
    let mut args: Vec<String> = ["cv", "--task", "cls", "--data", &f.p("train.csv"), "--k", "3", "--seed", "1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    args.extend(f.small_flags());
    let run_to = |out: &str, jobs: &str| {
        let mut a = args.clone();
        a.extend(["--out".to_string(), f.p(out), "--jobs".to_string(), jobs.to_string()]);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        run(&refs)
    };
    let out = run_to("cv1.json", "1");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("pooled"));
    assert_eq!(code(&run_to("cv2.json", "3")), 0);
    let r = f.json("cv1.json");
    assert_eq!(r["cv"].to_string(), f.json("cv2.json")["cv"].to_string());
    assert_eq!(r["settings"]["jobs"], 1);
    assert_eq!(r["cv"]["folds"].as_array().unwrap().len(), 3);
    assert_eq!(r["cv"]["pooled"]["overall"]["tp"].as_u64().unwrap()
        + r["cv"]["pooled"]["overall"]["fp"].as_u64().unwrap()
        + r["cv"]["pooled"]["overall"]["fn"].as_u64().unwrap()
        + r["cv"]["pooled"]["overall"]["tn"].as_u64().unwrap(), 12);

    let out = run(&["cv", "--data", &f.p("train.csv"), "--k", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn predict_mirrors_input() {
    let f = Fixture::new();
    assert_eq!(code(&f.train("seq", "train.jsonl", "m.ckpt", &[])), 0);
    let unlabeled: Vec<String> = ["the storm sank", "he drowned in debt", "hopes"]
        .iter()
        .enumerate()
        .map(|(i, s)| serde_json::json!({"id": format!("u{i}"), "tokens": s.split(' ').collect::<Vec<_>>()}).to_string())
        .collect();
    f.write("three.jsonl", &unlabeled.join("\n"));
    let emb = f.p("vectors.txt");
    for name in ["p1.jsonl", "p2.jsonl"] {
        let out = run(&["predict", "--model", &f.p("m.ckpt"), "--data", &f.p("three.jsonl"), "--embeddings", &emb, "--out", &f.p(name)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(f.read("p1.jsonl"), f.read("p2.jsonl"));
    let text = String::from_utf8(f.read("p1.jsonl")).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert_eq!(r["pred_labels"].as_array().unwrap().len(), r["tokens"].as_array().unwrap().len());
    }

    // Labeled input round-trips into eval.
    let out = run(&["predict", "--model", &f.p("m.ckpt"), "--data", &f.p("train.jsonl"), "--out", &f.p("lab.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&["eval", "--model", &f.p("m.ckpt"), "--data", &f.p("lab.jsonl"), "--out", &f.p("lab.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // CSV input gets a pred column.
    let out = run(&["predict", "--model", &f.p("m.ckpt"), "--data", &f.p("train.csv"), "--out", &f.p("p.csv")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = String::from_utf8(f.read("p.csv")).unwrap();
    assert!(csv.starts_with("id,genre,tokens,pos,verb_index,label,pred\n"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn predict_alignment_error_exits_one() {
    let f = Fixture::new();
    let ctx = f.p("ctx.jsonl");
    assert_eq!(code(&f.train("seq", "train.jsonl", "m.ckpt", &["--contextual", &ctx])), 0);
    f.write("other.jsonl", r#"{"id": "zzz", "tokens": ["the", "storm"]}"#);
    let out = run(&["predict", "--model", &f.p("m.ckpt"), "--data", &f.p("other.jsonl"), "--contextual", &ctx]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("zzz"), "{}", stderr(&out));
}

#[test]
fn no_contextual_flag_disables_loaded_vectors() {
    let f = Fixture::new();
    let ctx = f.p("ctx.jsonl");
    let out = f.train("seq", "train.jsonl", "n.ckpt", &["--contextual", &ctx, "--no-contextual"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let settings = &f.json("n.ckpt.report.json")["settings"];
    assert_eq!(settings["contextual_enabled"], false);
    assert_eq!(settings["train"]["contextual_enabled"], false);
    assert_eq!(settings["model"]["contextual_dim"], 3);
}
