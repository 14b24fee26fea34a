//! Scoring of prediction files against gold sample records, plus
//! dataset statistics.
//!
//! Classification tasks score with macro-F1 (the unweighted mean of
//! per-class F1); computation scores with exact match, where a sample
//! is correct if any predicted answer set equals any ground-truth set
//! after canonicalization. Missing predictions are kept as a
//! distinguished wrong class rather than dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::Literal;
use crate::parser::parse_literal;
use crate::samplegen::{SampleRecord, Task};
use crate::solver::classify;

/// Synthetic label recorded when a gold sample has no prediction.
pub const NO_ANSWER: &str = "<no-answer>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction for unknown sample id `{0}`")]
    UnknownSampleId(String),
    #[error("more than one prediction for sample id `{0}`")]
    DuplicatePrediction(String),
    #[error("label `{label}` for sample `{id}` is outside the task domain")]
    LabelOutOfDomain { id: String, label: String },
    #[error("gold sample `{id}` has an unparsable answer-set literal `{literal}`")]
    BadGold { id: String, literal: String },
    #[error("prediction for `{id}` carries no payload for its task")]
    MissingPayload { id: String },
}

/// One line of the predictions file: a label for ASE/ASV or one or more
/// candidate answer sets for ASC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_sets: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub total: usize,
    pub predicted: usize,
    pub missing: usize,
    pub unparsable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Scoring result for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub metric_name: String,
    pub metric: f64,
    pub per_class: Vec<ClassMetrics>,
    /// gold label -> predicted label -> count
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
    /// ASV accuracy by perturbation kind (plus "Correct" for the
    /// unperturbed candidates)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by_group: Option<BTreeMap<String, GroupStats>>,
    pub counts: EvalCounts,
}

/// One gold item for classification scoring; `group` feeds the ASV
/// perturbation breakdown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldLabel {
    pub id: String,
    pub label: String,
    pub group: Option<String>,
}

pub fn task_classes(task: Task) -> Vec<String> {
    match task {
        Task::Ase => vec!["True".into(), "False".into(), "Unknown".into()],
        Task::Asv => vec!["Yes".into(), "No".into()],
        Task::Asc => vec![],
    }
}

/// Macro-F1 scoring of label predictions against gold labels. Every
/// gold id may have at most one prediction; predictions for unknown
/// ids or with labels outside `classes` are errors, missing predictions
/// count as the synthetic wrong class.
pub fn score_classification(
    task: Task,
    golds: &[GoldLabel],
    preds: &[(String, String)],
    classes: &[String],
) -> Result<EvalReport, EvalError> {
    let gold_ids: BTreeSet<&str> = golds.iter().map(|g| g.id.as_str()).collect();
    let mut by_id: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, label) in preds {
        if !gold_ids.contains(id.as_str()) {
            return Err(EvalError::UnknownSampleId(id.clone()));
        }
        if !classes.iter().any(|c| c == label) {
            return Err(EvalError::LabelOutOfDomain { id: id.clone(), label: label.clone() });
        }
        if by_id.insert(id, label).is_some() {
            return Err(EvalError::DuplicatePrediction(id.clone()));
        }
    }

    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut groups: BTreeMap<String, GroupStats> = BTreeMap::new();
    let mut missing = 0usize;
    for gold in golds {
        let predicted = match by_id.get(gold.id.as_str()) {
            Some(&label) => label,
            None => {
                missing += 1;
                NO_ANSWER
            }
        };
        *confusion
            .entry(gold.label.clone())
            .or_default()
            .entry(predicted.to_string())
            .or_default() += 1;
        if let Some(group) = &gold.group {
            let stats = groups.entry(group.clone()).or_insert(GroupStats {
                total: 0,
                correct: 0,
                accuracy: 0.0,
            });
            stats.total += 1;
            if predicted == gold.label {
                stats.correct += 1;
            }
        }
    }
    for stats in groups.values_mut() {
        stats.accuracy = stats.correct as f64 / stats.total as f64;
    }

    let mut per_class = Vec::new();
    for class in classes {
        let support: usize = confusion.get(class).map(|row| row.values().sum()).unwrap_or(0);
        let tp: usize = confusion.get(class).and_then(|row| row.get(class)).copied().unwrap_or(0);
        let predicted: usize = confusion.values().filter_map(|row| row.get(class)).sum();
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            class: class.clone(),
            precision,
            recall,
            f1,
            support,
            predicted,
        });
    }
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64
    };

    Ok(EvalReport {
        task,
        metric_name: "macro_f1".into(),
        metric: macro_f1,
        per_class,
        confusion,
        by_group: if groups.is_empty() { None } else { Some(groups) },
        counts: EvalCounts {
            total: golds.len(),
            predicted: golds.len() - missing,
            missing,
            unparsable: 0,
        },
    })
}

/// Parse and canonicalize one answer set given as literal strings.
pub fn canonical_set(literals: &[String]) -> Result<BTreeSet<Literal>, String> {
    let mut out = BTreeSet::new();
    for text in literals {
        match parse_literal(text) {
            Ok(lit) if lit.is_ground() => {
                out.insert(lit);
            }
            _ => return Err(text.clone()),
        }
    }
    Ok(out)
}

/// Exact-match scoring for answer-set computation: a sample is correct
/// if any predicted set equals any ground-truth set after literal
/// normalization (whitespace, quoting, ordering, duplicates).
/// Unparsable predictions score as incorrect and are counted.
pub fn score_asc(
    golds: &[(String, Vec<Vec<String>>)],
    preds: &[(String, Vec<Vec<String>>)],
) -> Result<EvalReport, EvalError> {
    let gold_ids: BTreeSet<&str> = golds.iter().map(|(id, _)| id.as_str()).collect();
    let mut by_id: BTreeMap<&str, &Vec<Vec<String>>> = BTreeMap::new();
    for (id, sets) in preds {
        if !gold_ids.contains(id.as_str()) {
            return Err(EvalError::UnknownSampleId(id.clone()));
        }
        if by_id.insert(id, sets).is_some() {
            return Err(EvalError::DuplicatePrediction(id.clone()));
        }
    }

    let mut correct = 0usize;
    let mut missing = 0usize;
    let mut unparsable = 0usize;
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (id, gold_sets) in golds {
        let canonical_golds: Vec<BTreeSet<Literal>> = gold_sets
            .iter()
            .map(|s| {
                canonical_set(s).map_err(|literal| EvalError::BadGold { id: id.clone(), literal })
            })
            .collect::<Result<_, _>>()?;
        let outcome = match by_id.get(id.as_str()) {
            None => {
                missing += 1;
                "missing"
            }
            Some(sets) => {
                let mut parsed = Vec::new();
                let mut bad = false;
                for set in sets.iter() {
                    match canonical_set(set) {
                        Ok(s) => parsed.push(s),
                        Err(_) => bad = true,
                    }
                }
                if bad {
                    unparsable += 1;
                }
                if parsed.iter().any(|p| canonical_golds.iter().any(|g| g == p)) {
                    correct += 1;
                    "correct"
                } else {
                    "incorrect"
                }
            }
        };
        *confusion
            .entry("gold".to_string())
            .or_default()
            .entry(outcome.to_string())
            .or_default() += 1;
    }

    let total = golds.len();
    let em = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
    Ok(EvalReport {
        task: Task::Asc,
        metric_name: "exact_match".into(),
        metric: em,
        per_class: Vec::new(),
        confusion,
        by_group: None,
        counts: EvalCounts {
            total,
            predicted: total - missing,
            missing,
            unparsable,
        },
    })
}

/// Dataset statistics for one task, mirroring the benchmark's reported
/// row set: program size, syntactic classes, answer sets, label and
/// style distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub task: Task,
    pub sample_count: usize,
    pub avg_rules: f64,
    pub avg_facts: f64,
    pub arity_min: usize,
    pub arity_max: usize,
    pub chain_min: usize,
    pub chain_max: usize,
    pub positive_pct: f64,
    pub stratified_pct: f64,
    pub head_cycle_free_pct: f64,
    pub avg_answer_set_count: f64,
    pub avg_literals_per_set: f64,
    pub label_dist_pct: BTreeMap<String, f64>,
    pub style_dist_pct: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub tasks: Vec<TaskStats>,
}

/// Compute statistics over a batch of records, grouped by task.
/// Syntactic classes are recomputed with the solver's classifier, not
/// read from metadata.
pub fn dataset_stats(records: &[SampleRecord]) -> StatsReport {
    let mut by_task: BTreeMap<Task, Vec<&SampleRecord>> = BTreeMap::new();
    for record in records {
        by_task.entry(record.task).or_default().push(record);
    }
    let tasks = by_task
        .into_iter()
        .map(|(task, records)| {
            let n = records.len();
            let nf = n as f64;
            let mut stats = TaskStats {
                task,
                sample_count: n,
                avg_rules: 0.0,
                avg_facts: 0.0,
                arity_min: usize::MAX,
                arity_max: 0,
                chain_min: usize::MAX,
                chain_max: 0,
                positive_pct: 0.0,
                stratified_pct: 0.0,
                head_cycle_free_pct: 0.0,
                avg_answer_set_count: 0.0,
                avg_literals_per_set: 0.0,
                label_dist_pct: BTreeMap::new(),
                style_dist_pct: BTreeMap::new(),
            };
            let mut set_count = 0usize;
            let mut literal_count = 0usize;
            for record in &records {
                stats.avg_rules += record.program.rules.len() as f64 / nf;
                stats.avg_facts += record.program.facts.len() as f64 / nf;
                for (_, arity) in record.program.predicates() {
                    stats.arity_min = stats.arity_min.min(arity);
                    stats.arity_max = stats.arity_max.max(arity);
                }
                stats.chain_min = stats.chain_min.min(record.metadata.counts.chain_length);
                stats.chain_max = stats.chain_max.max(record.metadata.counts.chain_length);
                let class = classify(&record.program);
                if class.positive {
                    stats.positive_pct += 100.0 / nf;
                }
                if class.stratified {
                    stats.stratified_pct += 100.0 / nf;
                }
                if class.head_cycle_free {
                    stats.head_cycle_free_pct += 100.0 / nf;
                }
                stats.avg_answer_set_count += record.answer_sets.len() as f64 / nf;
                set_count += record.answer_sets.len();
                literal_count += record.answer_sets.iter().map(Vec::len).sum::<usize>();
                if let Some(label) = &record.label {
                    *stats.label_dist_pct.entry(label.clone()).or_default() += 100.0 / nf;
                }
                let style = serde_json::to_value(record.metadata.predicate_style)
                    .expect("style serializes")
                    .as_str()
                    .unwrap()
                    .to_string();
                *stats.style_dist_pct.entry(style).or_default() += 100.0 / nf;
            }
            if set_count > 0 {
                stats.avg_literals_per_set = literal_count as f64 / set_count as f64;
            }
            if stats.arity_min == usize::MAX {
                stats.arity_min = 0;
            }
            if stats.chain_min == usize::MAX {
                stats.chain_min = 0;
            }
            stats
        })
        .collect();
    StatsReport { tasks }
}

/// Human-readable rendering of an evaluation report.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "task: {}", report.task);
    let _ = writeln!(out, "{}: {:.4}", report.metric_name, report.metric);
    let _ = writeln!(
        out,
        "samples: {} (predicted {}, missing {}, unparsable {})",
        report.counts.total, report.counts.predicted, report.counts.missing, report.counts.unparsable
    );
    if !report.per_class.is_empty() {
        let _ = writeln!(out, "{:<12} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for c in &report.per_class {
            let _ = writeln!(
                out,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                c.class, c.precision, c.recall, c.f1, c.support
            );
        }
    }
    if let Some(groups) = &report.by_group {
        let _ = writeln!(out, "breakdown by candidate kind:");
        for (group, stats) in groups {
            let _ = writeln!(
                out,
                "  {:<8} accuracy {:.4} ({}/{})",
                group, stats.accuracy, stats.correct, stats.total
            );
        }
    }
    if !report.confusion.is_empty() {
        let _ = writeln!(out, "confusion (gold -> predicted):");
        for (gold, row) in &report.confusion {
            let cells: Vec<String> = row.iter().map(|(p, n)| format!("{p}={n}")).collect();
            let _ = writeln!(out, "  {:<12} {}", gold, cells.join("  "));
        }
    }
    out
}

/// Human-readable rendering of dataset statistics.
pub fn render_stats(report: &StatsReport) -> String {
    let mut out = String::new();
    for s in &report.tasks {
        let _ = writeln!(out, "task: {} ({} samples)", s.task, s.sample_count);
        let _ = writeln!(out, "  program size: avg rules {:.2}, avg facts {:.2}", s.avg_rules, s.avg_facts);
        let _ = writeln!(out, "  pred. arity: {}-{}", s.arity_min, s.arity_max);
        let _ = writeln!(out, "  chain length: {}-{}", s.chain_min, s.chain_max);
        let _ = writeln!(
            out,
            "  syntactic classes: positive {:.1}%, stratified {:.1}%, head-cycle-free {:.1}%",
            s.positive_pct, s.stratified_pct, s.head_cycle_free_pct
        );
        let _ = writeln!(
            out,
            "  answer sets: avg count {:.2}, avg literals/set {:.2}",
            s.avg_answer_set_count, s.avg_literals_per_set
        );
        if !s.label_dist_pct.is_empty() {
            let cells: Vec<String> =
                s.label_dist_pct.iter().map(|(l, p)| format!("{l} {p:.1}%")).collect();
            let _ = writeln!(out, "  labels: {}", cells.join(", "));
        }
        let cells: Vec<String> =
            s.style_dist_pct.iter().map(|(l, p)| format!("{l} {p:.1}%")).collect();
        let _ = writeln!(out, "  styles: {}", cells.join(", "));
    }
    out
}
