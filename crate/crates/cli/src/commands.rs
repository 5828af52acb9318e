use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use metaphor_core::data::{
    dev_split, load_contextual, load_examples, load_word_vectors, read_sequence_jsonl, write_classification_csv,
    EmbeddingStore, Example, WordVectors,
};
use metaphor_core::harness::{
    evaluate, evaluate_baseline, pos_breakdown, run_cv, train as train_model, CvReport, EvalTask,
    PosRow,
};
use metaphor_core::layers::Init;
use metaphor_core::models::{Checkpoint, LexicalBaseline, Model, Task};
use metaphor_core::{derive_seed, EmbeddingStore64, Model64};
use serde::Serialize;
use serde_json::json;

use crate::settings::{Common, Hyper, Settings};
use crate::CliError;

const INIT_STREAM: u64 = 0;
const DEV_STREAM: u64 = 3;

type CmdResult = Result<(), CliError>;

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file not found: {}", path.display())))
    }
}

fn require_optional(path: Option<&str>, what: &str) -> CmdResult {
    path.map_or(Ok(()), |p| require_file(Path::new(p), what))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn load_nonempty(path: &Path) -> anyhow::Result<Vec<Example>> {
    let examples = load_examples(path)?;
    if examples.is_empty() {
        bail!("no examples in {}", path.display());
    }
    Ok(examples)
}

/// Loads word vectors restricted to the corpora's vocabulary, and contextual
/// vectors when enabled, then checks contextual alignment.
fn build_store(
    settings: &Settings,
    word_dim: usize,
    contextual_dim: usize,
    corpora: &[&[Example]],
) -> anyhow::Result<EmbeddingStore64> {
    let words = match &settings.embeddings {
        Some(path) => {
            let keep: HashSet<String> = corpora
                .iter()
                .flat_map(|c| c.iter())
                .flat_map(|ex| ex.tokens.iter())
                .flat_map(|t| [t.clone(), t.to_lowercase()])
                .collect();
            load_word_vectors(path, word_dim, settings.permissive_vectors, Some(&keep))?
        }
        None => {
            log::warn!("no --embeddings given; every word vector is zero");
            WordVectors::new(word_dim)
        }
    };
    let contextual = match (&settings.contextual, settings.contextual_enabled) {
        (Some(path), true) => Some(load_contextual(path, contextual_dim)?),
        _ => None,
    };
    let store = EmbeddingStore::new(words, contextual, contextual_dim)?;
    for corpus in corpora {
        store.check_alignment(corpus)?;
    }
    Ok(store)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_checkpoint(path: &Path) -> anyhow::Result<(Checkpoint, Model64)> {
    let checkpoint = Checkpoint::load(path)?;
    let model = Model::from_checkpoint(&checkpoint).with_context(|| format!("cannot restore {}", path.display()))?;
    Ok((checkpoint, model))
}

/// Inputs that matter when applying an existing checkpoint.
fn input_echo(settings: &Settings) -> serde_json::Value {
    json!({
        "embeddings": settings.embeddings,
        "contextual": settings.contextual,
        "contextual_enabled": settings.contextual_enabled,
        "permissive_vectors": settings.permissive_vectors,
    })
}

fn warn_task_flag(common: &Common, model: &Model64) {
    if let Some(task) = common.task {
        if task != model.config().task {
            log::warn!("ignoring --task {task}: the checkpoint holds a {} model", model.config().task);
        }
    }
}

fn print_pos_rows(rows: &[PosRow], min_rate: f64) {
    if rows.is_empty() {
        return;
    }
    println!("POS tags with metaphor rate > {min_rate}:");
    println!("{:<10} {:>7} {:>6} {:>6} {:>6} {:>6}", "pos", "n", "rate", "P", "R", "F1");
    for r in rows {
        println!(
            "{:<10} {:>7} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            r.pos, r.count, r.metaphor_rate, r.precision, r.recall, r.f1
        );
    }
}

pub fn train(data: &Path, dev: Option<&Path>, out: &Path, common: &Common, hyper: &Hyper) -> CmdResult {
    let settings = Settings::resolve(common, hyper)?;
    require_file(data, "training")?;
    if let Some(dev) = dev {
        require_file(dev, "dev")?;
    }
    require_optional(settings.embeddings.as_deref(), "embeddings")?;
    require_optional(settings.contextual.as_deref(), "contextual")?;

    let examples = load_nonempty(data)?;
    let (train_set, dev_set) = match dev {
        Some(path) => (examples, load_examples(path)?),
        None if settings.dev_fraction > 0.0 => {
            match dev_split(&examples, settings.dev_fraction, derive_seed(settings.seed, DEV_STREAM)) {
                Ok(split) => split,
                Err(e) => {
                    log::warn!("no dev split ({e}); training without early stopping");
                    (examples, Vec::new())
                }
            }
        }
        None => (examples, Vec::new()),
    };
    let store = build_store(
        &settings,
        settings.model.word_dim,
        settings.model.contextual_dim,
        &[&train_set, &dev_set],
    )?;
    let model = Model::new(settings.model.clone(), Init::Xavier, derive_seed(settings.seed, INIT_STREAM))?;
    let history = train_model(&model, &train_set, &dev_set, &store, &settings.train)?;
    let dev_report = if dev_set.is_empty() {
        None
    } else {
        Some(evaluate(&model, &dev_set, &store, EvalTask::infer(settings.task, &dev_set))?)
    };

    let mut extra = serde_json::Map::new();
    extra.insert("settings".into(), serde_json::to_value(&settings).map_err(anyhow::Error::from)?);
    model.to_checkpoint(extra)?.save(out)?;
    let history_path = with_suffix(out, ".history.csv");
    std::fs::write(&history_path, history.to_csv())
        .with_context(|| format!("cannot write {}", history_path.display()))?;
    let report_path = with_suffix(out, ".report.json");
    write_json(
        &report_path,
        &json!({
            "command": "train",
            "settings": settings,
            "train_size": train_set.len(),
            "dev_size": dev_set.len(),
            "history": history,
            "dev": dev_report,
        }),
    )?;

    println!(
        "trained {} model: {} epochs, best epoch {}, {} train / {} dev examples",
        settings.task,
        history.epochs.len(),
        history.best_epoch,
        train_set.len(),
        dev_set.len()
    );
    if let Some(report) = &dev_report {
        print!("{}", report.table());
    }
    println!("checkpoint: {}", out.display());
    Ok(())
}

pub fn eval(model_path: &Path, data: &Path, out: Option<&Path>, pos_min_rate: f64, common: &Common) -> CmdResult {
    let settings = Settings::resolve(common, &Hyper::default())?;
    require_file(model_path, "checkpoint")?;
    require_file(data, "data")?;
    require_optional(settings.embeddings.as_deref(), "embeddings")?;
    require_optional(settings.contextual.as_deref(), "contextual")?;

    let (checkpoint, model) = load_checkpoint(model_path)?;
    warn_task_flag(common, &model);
    let config = model.config().clone();
    let examples = load_nonempty(data)?;
    let store = build_store(&settings, config.word_dim, config.contextual_dim, &[&examples])?;
    let level = EvalTask::infer(config.task, &examples);
    let report = evaluate(&model, &examples, &store, level)?;
    let rows = pos_breakdown(&report, pos_min_rate);

    let out = out.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(model_path, ".eval.json"));
    write_json(
        &out,
        &json!({
            "command": "eval",
            "inputs": input_echo(&settings),
            "checkpoint": checkpoint.config()?,
            "level": level,
            "examples": examples.len(),
            "report": report,
            "pos_breakdown": rows,
        }),
    )?;
    print!("{}", report.table());
    print_pos_rows(&rows, pos_min_rate);
    Ok(())
}

pub fn baseline(train_path: &Path, test_path: &Path, out: &Path, pos_min_rate: f64, common: &Common) -> CmdResult {
    let settings = Settings::resolve(common, &Hyper::default())?;
    require_file(train_path, "training")?;
    require_file(test_path, "test")?;
    let train_set = load_examples(train_path)?;
    let test_set = load_nonempty(test_path)?;
    let baseline = LexicalBaseline::fit(&train_set);
    let level = EvalTask::infer(settings.task, &test_set);
    let report = evaluate_baseline(&baseline, &test_set, level)?;
    let rows = pos_breakdown(&report, pos_min_rate);
    write_json(
        out,
        &json!({
            "command": "baseline",
            "task": settings.task,
            "level": level,
            "train_size": train_set.len(),
            "test_size": test_set.len(),
            "vocabulary": baseline.vocabulary_size(),
            "report": report,
            "pos_breakdown": rows,
        }),
    )?;
    print!("{}", report.table());
    print_pos_rows(&rows, pos_min_rate);
    Ok(())
}

fn print_cv(report: &CvReport) {
    println!("{:<6} {:>6} {:>6} {:>6} {:>6} {:>6}", "fold", "n", "P", "R", "F1", "Acc");
    for f in &report.folds {
        let m = &f.report.overall;
        println!(
            "{:<6} {:>6} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            f.fold, f.test_size, m.precision, m.recall, m.f1, m.accuracy
        );
    }
    let spread = |name: &str, s: &metaphor_core::harness::Spread| println!("{name:<10} {:.3} ± {:.3}", s.mean, s.std);
    spread("precision", &report.precision);
    spread("recall", &report.recall);
    spread("f1", &report.f1);
    spread("accuracy", &report.accuracy);
    println!("pooled:");
    print!("{}", report.pooled.table());
}

pub fn cv(data: &Path, k: usize, out: &Path, common: &Common, hyper: &Hyper) -> CmdResult {
    let settings = Settings::resolve(common, hyper)?;
    require_file(data, "data")?;
    require_optional(settings.embeddings.as_deref(), "embeddings")?;
    require_optional(settings.contextual.as_deref(), "contextual")?;
    let examples = load_nonempty(data)?;
    let store = build_store(&settings, settings.model.word_dim, settings.model.contextual_dim, &[&examples])?;
    let report = run_cv(&examples, &store, &settings.model, &settings.train, k, settings.jobs)?;
    write_json(
        out,
        &json!({
            "command": "cv",
            "settings": settings,
            "k": k,
            "dev_fraction": metaphor_core::harness::CV_DEV_FRACTION,
            "cv": report,
        }),
    )?;
    print_cv(&report);
    Ok(())
}

pub fn predict(model_path: &Path, data: &Path, out: Option<&Path>, common: &Common) -> CmdResult {
    let settings = Settings::resolve(common, &Hyper::default())?;
    require_file(model_path, "checkpoint")?;
    require_file(data, "data")?;
    require_optional(settings.embeddings.as_deref(), "embeddings")?;
    require_optional(settings.contextual.as_deref(), "contextual")?;

    let (_, model) = load_checkpoint(model_path)?;
    warn_task_flag(common, &model);
    let config = model.config().clone();
    let csv = is_csv(data);
    let examples = if csv {
        load_examples(data)?
    } else {
        read_sequence_jsonl(data, false)?
    };
    let store = build_store(&settings, config.word_dim, config.contextual_dim, &[&examples])?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| with_suffix(data, if csv { ".pred.csv" } else { ".pred.jsonl" }));

    if csv {
        let preds = examples
            .iter()
            .map(|ex| model.predict_target(&store, ex))
            .collect::<Result<Vec<_>, _>>()?;
        write_classification_csv(&out, &examples, Some(&preds))?;
    } else {
        write_jsonl_predictions(data, &out, &examples, |ex| {
            Ok(match config.task {
                Task::Seq => ("pred_labels", json!(model.predict_tokens(&store, ex)?)),
                Task::Cls => ("pred", json!(model.predict_target(&store, ex)?)),
            })
        })?;
    }
    println!("wrote {} predictions to {}", examples.len(), out.display());
    Ok(())
}

/// Copies each input record and adds one prediction field.
fn write_jsonl_predictions(
    input: &Path,
    out: &Path,
    examples: &[Example],
    mut predict: impl FnMut(&Example) -> anyhow::Result<(&'static str, serde_json::Value)>,
) -> anyhow::Result<()> {
    let reader = BufReader::new(File::open(input).with_context(|| format!("cannot open {}", input.display()))?);
    let mut records = Vec::with_capacity(examples.len());
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line)?;
        records.push(record);
    }
    if records.len() != examples.len() {
        bail!("read {} records but {} examples from {}", records.len(), examples.len(), input.display());
    }
    let file = File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    let mut w = BufWriter::new(file);
    for (mut record, ex) in records.into_iter().zip(examples) {
        let (key, value) = predict(ex)?;
        record.insert(key.into(), value);
        writeln!(w, "{}", serde_json::Value::Object(record))?;
    }
    w.flush()?;
    Ok(())
}
