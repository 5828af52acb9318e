use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingStore, Example, Genre, METAPHOR};
use crate::error::{Error, Result};
use crate::models::{LexicalBaseline, Model, Task};
use crate::Scalar;

/// Confusion counts for the metaphor class and the metrics derived from
/// them. Every ratio with a zero denominator is 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        let accuracy = ratio((tp + tn) as f64, (tp + fp + fn_ + tn) as f64);
        Metrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Gold metaphor count.
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn record(&mut self, gold: u8, pred: u8) {
        *self = self.merge(&Self::single(gold, pred));
    }

    fn single(gold: u8, pred: u8) -> Self {
        let (g, p) = (gold == METAPHOR, pred == METAPHOR);
        Self::from_counts(u64::from(g && p), u64::from(!g && p), u64::from(g && !p), u64::from(!g && !p))
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn_ + other.fn_,
            self.tn + other.tn,
        )
    }
}

/// One scored position: gold and predicted label plus slice keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scored<'a> {
    pub gold: u8,
    pub pred: u8,
    pub pos: Option<&'a str>,
    pub genre: Option<Genre>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Metrics,
    pub by_pos: BTreeMap<String, Metrics>,
    pub by_genre: BTreeMap<String, Metrics>,
    /// Mean genre F1, present only when all four genres occur.
    pub macro_f1: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions<'a>(items: impl IntoIterator<Item = Scored<'a>>) -> Self {
        let mut report = EvalReport::default();
        for s in items {
            report.overall.record(s.gold, s.pred);
            if let Some(pos) = s.pos {
                report.by_pos.entry(pos.to_string()).or_default().record(s.gold, s.pred);
            }
            if let Some(genre) = s.genre {
                report.by_genre.entry(genre.to_string()).or_default().record(s.gold, s.pred);
            }
        }
        report.macro_f1 = macro_f1_by_genre(&report).ok();
        report
    }

    /// Sums counts slice by slice and recomputes every metric.
    pub fn merge(&self, other: &Self) -> Self {
        fn merge_maps(a: &BTreeMap<String, Metrics>, b: &BTreeMap<String, Metrics>) -> BTreeMap<String, Metrics> {
            let mut out = a.clone();
            for (k, m) in b {
                let e = out.entry(k.clone()).or_default();
                *e = e.merge(m);
            }
            out
        }
        let mut report = EvalReport {
            overall: self.overall.merge(&other.overall),
            by_pos: merge_maps(&self.by_pos, &other.by_pos),
            by_genre: merge_maps(&self.by_genre, &other.by_genre),
            macro_f1: None,
        };
        report.macro_f1 = macro_f1_by_genre(&report).ok();
        report
    }

    /// Plain-text metric table with three decimals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, name: &str, m: &Metrics| {
            let _ = writeln!(
                out,
                "{name:<16} {:>7} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
                m.total(),
                m.precision,
                m.recall,
                m.f1,
                m.accuracy
            );
        };
        let _ = writeln!(out, "{:<16} {:>7} {:>6} {:>6} {:>6} {:>6}", "slice", "n", "P", "R", "F1", "Acc");
        row(&mut out, "overall", &self.overall);
        for (g, m) in &self.by_genre {
            row(&mut out, &format!("genre:{g}"), m);
        }
        if let Some(macro_f1) = self.macro_f1 {
            let _ = writeln!(out, "{:<16} {:>7} {:>6} {:>6} {:>6.3}", "macro-genre", "", "", "", macro_f1);
        }
        for (p, m) in &self.by_pos {
            row(&mut out, &format!("pos:{p}"), m);
        }
        out
    }
}

/// Unweighted mean F1 over the four genres.
pub fn macro_f1_by_genre(report: &EvalReport) -> Result<f64> {
    let mut total = 0.0;
    for genre in Genre::ALL {
        let m = report
            .by_genre
            .get(genre.as_str())
            .ok_or_else(|| Error::Domain(format!("no '{genre}' slice in the report")))?;
        total += m.f1;
    }
    Ok(total / Genre::ALL.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosRow {
    pub pos: String,
    pub count: u64,
    pub metaphor_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-POS rows keeping tags whose gold metaphor rate exceeds
/// `min_metaphor_rate` (0 keeps every tag with at least one metaphor).
pub fn pos_breakdown(report: &EvalReport, min_metaphor_rate: f64) -> Vec<PosRow> {
    report
        .by_pos
        .iter()
        .map(|(pos, m)| PosRow {
            pos: pos.clone(),
            count: m.total(),
            metaphor_rate: ratio(m.positives() as f64, m.total() as f64),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        })
        .filter(|r| r.metaphor_rate > min_metaphor_rate)
        .collect()
}

/// What gets scored: every token, or only each example's target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTask {
    Tokens,
    Targets,
}

impl EvalTask {
    /// Targets for the classifier, and for the labeler when every example
    /// names a target; tokens otherwise.
    pub fn infer(task: Task, examples: &[Example]) -> Self {
        if task == Task::Cls || (!examples.is_empty() && examples.iter().all(|e| e.target_index.is_some())) {
            EvalTask::Targets
        } else {
            EvalTask::Tokens
        }
    }
}

fn target_of(example: &Example) -> Result<usize> {
    example
        .target_index
        .ok_or_else(|| Error::Domain(format!("example '{}' has no target index", example.id)))
}

/// Scores `predict`'s output against gold labels: per token for
/// [`EvalTask::Tokens`], at the target for [`EvalTask::Targets`].
pub fn evaluate_with(
    examples: &[Example],
    task: EvalTask,
    mut predict: impl FnMut(&Example, EvalTask) -> Result<Vec<u8>>,
) -> Result<EvalReport> {
    let mut scored = Vec::new();
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        let p = predict(ex, task)?;
        let expected = match task {
            EvalTask::Tokens => ex.len(),
            EvalTask::Targets => 1,
        };
        if p.len() != expected {
            return Err(Error::Dimension {
                op: "evaluate predictions",
                left: vec![expected],
                right: vec![p.len()],
            });
        }
        preds.push(p);
    }
    for (ex, p) in examples.iter().zip(&preds) {
        match task {
            EvalTask::Tokens => scored.extend(ex.labels.iter().zip(p).enumerate().map(|(i, (&gold, &pred))| Scored {
                gold,
                pred,
                pos: ex.pos_at(i),
                genre: ex.genre,
            })),
            EvalTask::Targets => {
                let t = target_of(ex)?;
                scored.push(Scored {
                    gold: ex.labels[t],
                    pred: p[0],
                    pos: ex.pos_at(t),
                    genre: ex.genre,
                });
            }
        }
    }
    Ok(EvalReport::from_predictions(scored))
}

pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    examples: &[Example],
    store: &EmbeddingStore<T>,
    task: EvalTask,
) -> Result<EvalReport> {
    evaluate_with(examples, task, |ex, task| match task {
        EvalTask::Tokens => model.predict_tokens(store, ex),
        EvalTask::Targets => Ok(vec![model.predict_target(store, ex)?]),
    })
}

pub fn evaluate_baseline(baseline: &LexicalBaseline, examples: &[Example], task: EvalTask) -> Result<EvalReport> {
    evaluate_with(examples, task, |ex, task| match task {
        EvalTask::Tokens => Ok(baseline.predict_tokens(ex)),
        EvalTask::Targets => Ok(vec![baseline.predict(&ex.tokens[target_of(ex)?])]),
    })
}
