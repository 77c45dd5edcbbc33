//! Accuracy aggregation with Wilson score intervals and failure breakdowns.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::oracle::{naive_baseline, FailureKind};
use crate::taskgen::Condition;
use crate::topology::{Rule, Topology};

use super::records::{EvalRecord, RecordStatus};

const Z_95: f64 = 1.959963984540054;

/// Accuracy and failure profile of one (model, condition, topology, rule)
/// group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub model: String,
    pub condition: Condition,
    pub topology: Topology,
    pub rule: Option<Rule>,
    pub context_length: usize,
    /// All terminal records in the group.
    pub total: usize,
    /// Records entering the accuracy denominator.
    pub scored: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub unparseable: usize,
    pub invalid_word: usize,
    pub wrong_word: usize,
    /// Endpoint failures, reported separately from accuracy unless the
    /// config counts them as incorrect.
    pub infra_failures: usize,
    pub unscored: usize,
    pub naive_baseline: Option<f64>,
}

/// 95% Wilson score interval for `correct` successes out of `total`.
pub fn wilson_interval(correct: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 0.0);
    }
    let n = total as f64;
    let p = correct as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (center - half, center + half)
}

/// Group records and compute per-group accuracy. Endpoint failures are
/// excluded from the accuracy denominator and reported in their own column;
/// set `count_failures_as_incorrect` to fold them in as wrong answers.
pub fn aggregate_with(
    records: &[EvalRecord],
    count_failures_as_incorrect: bool,
) -> Vec<GroupSummary> {
    type Key = (String, Condition, Topology, Option<Rule>, usize);
    let mut groups: BTreeMap<String, (Key, Vec<&EvalRecord>)> = BTreeMap::new();
    for record in records {
        let key: Key = (
            record.model.clone(),
            record.condition,
            record.provenance.topology,
            record.provenance.rule,
            record.provenance.context_length,
        );
        let sort_key = format!(
            "{}|{:?}|{:?}|{}|{:?}|{}",
            key.0, key.1, key.2.kind, key.2.size, key.3, key.4
        );
        groups.entry(sort_key).or_insert((key, Vec::new())).1.push(record);
    }
    groups
        .into_values()
        .map(|((model, condition, topology, rule, context_length), group)| {
            let total = group.len();
            let infra_failures = group
                .iter()
                .filter(|r| r.status == RecordStatus::InfraFailure)
                .count();
            let mut scored = 0;
            let mut correct = 0;
            let mut unparseable = 0;
            let mut invalid_word = 0;
            let mut wrong_word = 0;
            let mut unscored = 0;
            for record in &group {
                if record.status == RecordStatus::InfraFailure {
                    if count_failures_as_incorrect {
                        scored += 1;
                    }
                    continue;
                }
                match &record.score {
                    Some(score) => {
                        scored += 1;
                        if score.correct {
                            correct += 1;
                        }
                        match score.failure_kind {
                            FailureKind::None => {}
                            FailureKind::Unparseable => unparseable += 1,
                            FailureKind::InvalidWord => invalid_word += 1,
                            FailureKind::WrongWord => wrong_word += 1,
                        }
                    }
                    None => unscored += 1,
                }
            }
            let accuracy = if scored > 0 {
                correct as f64 / scored as f64
            } else {
                0.0
            };
            let (wilson_low, wilson_high) = wilson_interval(correct, scored);
            let baseline = rule.map(|r| naive_baseline(&topology, r));
            GroupSummary {
                model,
                condition,
                topology,
                rule,
                context_length,
                total,
                scored,
                correct,
                accuracy,
                wilson_low,
                wilson_high,
                unparseable,
                invalid_word,
                wrong_word,
                infra_failures,
                unscored,
                naive_baseline: baseline,
            }
        })
        .collect()
}

pub fn aggregate(records: &[EvalRecord]) -> Vec<GroupSummary> {
    aggregate_with(records, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::records::RECORD_SCHEMA_VERSION;
    use crate::oracle::Score;
    use crate::taskgen::{PromptStyle, Provenance, Seeds};

    fn record(correct: Option<bool>, status: RecordStatus) -> EvalRecord {
        let provenance = Provenance {
            topology: Topology::grid(4).unwrap(),
            rule: Some(Rule::OneStep),
            seeds: Seeds {
                walk: 0,
                words: 0,
                shots: 0,
            },
            context_length: 50,
            n_shots: Some(10),
            wordlist_id: "w".into(),
            hinted: false,
            style: PromptStyle::Prefill,
        };
        EvalRecord {
            v: RECORD_SCHEMA_VERSION,
            record_id: String::new(),
            experiment_id: "e".into(),
            replicate: 0,
            model: "m".into(),
            condition: Condition::Awm,
            bundle_id: String::new(),
            provenance,
            messages: vec![],
            response: None,
            thinking_tokens: None,
            score: correct.map(|c| Score {
                correct: c,
                extracted_answer: "w".into(),
                failure_kind: if c {
                    FailureKind::None
                } else {
                    FailureKind::WrongWord
                },
            }),
            status,
            error: None,
            started_ms: None,
            finished_ms: None,
            attempts: 1,
        }
    }

    #[test]
    fn accuracy_is_correct_over_scored() {
        let mut records: Vec<EvalRecord> = (0..4)
            .map(|_| record(Some(true), RecordStatus::Ok))
            .collect();
        records.extend((0..6).map(|_| record(Some(false), RecordStatus::Ok)));
        let summaries = aggregate(&records);
        assert_eq!(summaries.len(), 1);
        let s = &summaries[0];
        assert_eq!(s.scored, 10);
        assert_eq!(s.correct, 4);
        assert!((s.accuracy - 0.4).abs() < 1e-12);
        // frozen from the closed-form Wilson formula at z = 1.959963984540054
        assert!((s.wilson_low - 0.168180329706).abs() < 1e-9, "{}", s.wilson_low);
        assert!((s.wilson_high - 0.687326230266).abs() < 1e-9, "{}", s.wilson_high);
        assert_eq!(s.naive_baseline, Some(1.0 / 3.0));
    }

    #[test]
    fn all_unparseable_breakdown() {
        let records: Vec<EvalRecord> = (0..5)
            .map(|_| {
                let mut r = record(Some(false), RecordStatus::Ok);
                r.score.as_mut().unwrap().failure_kind = FailureKind::Unparseable;
                r
            })
            .collect();
        let summaries = aggregate(&records);
        let s = &summaries[0];
        assert_eq!(s.accuracy, 0.0);
        assert_eq!(s.unparseable, 5);
        assert_eq!(s.wrong_word, 0);
    }

    #[test]
    fn infra_failures_excluded_unless_requested() {
        let mut records: Vec<EvalRecord> = (0..8)
            .map(|_| record(Some(true), RecordStatus::Ok))
            .collect();
        records.extend((0..2).map(|_| record(None, RecordStatus::InfraFailure)));
        let lenient = aggregate(&records);
        assert_eq!(lenient[0].scored, 8);
        assert_eq!(lenient[0].accuracy, 1.0);
        assert_eq!(lenient[0].infra_failures, 2);
        let strict = aggregate_with(&records, true);
        assert_eq!(strict[0].scored, 10);
        assert!((strict[0].accuracy - 0.8).abs() < 1e-12);
    }

    #[test]
    fn empty_input_gives_empty_summary() {
        assert!(aggregate(&[]).is_empty());
    }
}
