//! Report emission: summary tables and long-format plot data as CSV.
//!
//! Files are written through a temporary path and renamed into place, so a
//! failed write never leaves a partial report behind.

use std::path::{Path, PathBuf};

use crate::geometry::MetricSeries;
use crate::topology::TopologyKind;

use super::aggregate::GroupSummary;
use super::HarnessError;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";

fn write_atomically(
    path: &Path,
    write: impl FnOnce(&Path) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    match write(&tmp) {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn topology_name(summary: &GroupSummary) -> String {
    let kind = match summary.topology.kind {
        TopologyKind::Grid => "grid",
        TopologyKind::Line => "line",
    };
    format!("{kind}{}", summary.topology.size)
}

/// Write one row per group: accuracy, Wilson interval, failure breakdown,
/// and the analytic baseline.
pub fn write_summary_csv(path: &Path, summaries: &[GroupSummary]) -> Result<(), HarnessError> {
    write_atomically(path, |tmp| {
        let mut writer = csv::Writer::from_path(tmp).map_err(csv_err)?;
        writer
            .write_record([
                "model",
                "condition",
                "topology",
                "rule",
                "context_length",
                "total",
                "scored",
                "correct",
                "accuracy",
                "wilson_low",
                "wilson_high",
                "unparseable",
                "invalid_word",
                "wrong_word",
                "infra_failures",
                "unscored",
                "naive_baseline",
            ])
            .map_err(csv_err)?;
        for s in summaries {
            writer
                .write_record([
                    s.model.clone(),
                    format!("{:?}", s.condition),
                    topology_name(s),
                    s.rule.map(|r| r.name().to_string()).unwrap_or_default(),
                    s.context_length.to_string(),
                    s.total.to_string(),
                    s.scored.to_string(),
                    s.correct.to_string(),
                    format!("{:.6}", s.accuracy),
                    format!("{:.6}", s.wilson_low),
                    format!("{:.6}", s.wilson_high),
                    s.unparseable.to_string(),
                    s.invalid_word.to_string(),
                    s.wrong_word.to_string(),
                    s.infra_failures.to_string(),
                    s.unscored.to_string(),
                    s.naive_baseline
                        .map(|b| format!("{b:.6}"))
                        .unwrap_or_default(),
                ])
                .map_err(csv_err)?;
        }
        writer.flush()?;
        Ok(())
    })
}

/// Write metric samples in long format: one row per (position, layer,
/// metric). Degenerate samples keep their row with an empty value and a
/// flag, so gaps are visible to plotting tools.
pub fn write_plot_data_csv(path: &Path, series: &MetricSeries) -> Result<(), HarnessError> {
    write_atomically(path, |tmp| {
        let mut writer = csv::Writer::from_path(tmp).map_err(csv_err)?;
        writer
            .write_record(["context_position", "layer", "metric", "value", "degenerate"])
            .map_err(csv_err)?;
        for sample in &series.samples {
            for (metric, value) in [
                ("dirichlet_energy", sample.dirichlet_energy),
                ("distance_correlation", sample.distance_correlation),
            ] {
                writer
                    .write_record([
                        sample.context_position.to_string(),
                        sample.layer_id.to_string(),
                        metric.to_string(),
                        value.map(|v| format!("{v:.12}")).unwrap_or_default(),
                        (value.is_none() as u8).to_string(),
                    ])
                    .map_err(csv_err)?;
            }
        }
        writer.flush()?;
        Ok(())
    })
}

/// Emit the full report into a directory: `summary.csv`, plus
/// `plot_data.csv` when a metric series is given. Returns the paths written.
pub fn emit_report(
    summaries: &[GroupSummary],
    metric_series: Option<&MetricSeries>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_summary_csv(&summary_path, summaries)?;
    written.push(summary_path);
    if let Some(series) = metric_series {
        let plot_path = out_dir.join(PLOT_DATA_FILE);
        write_plot_data_csv(&plot_path, series)?;
        written.push(plot_path);
    }
    Ok(written)
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MetricSample, MetricSeries};
    use crate::harness::aggregate::aggregate;
    use crate::harness::records::{EvalRecord, RecordStatus, RECORD_SCHEMA_VERSION};
    use crate::oracle::{FailureKind, Score};
    use crate::taskgen::{Condition, PromptStyle, Provenance, Seeds};
    use crate::topology::Topology;
    use tempfile::tempdir;

    fn sample_summaries() -> Vec<GroupSummary> {
        let provenance = Provenance {
            topology: Topology::line(16).unwrap(),
            rule: Some(crate::topology::Rule::OneStep),
            seeds: Seeds {
                walk: 0,
                words: 0,
                shots: 0,
            },
            context_length: 100,
            n_shots: Some(10),
            wordlist_id: "w".into(),
            hinted: false,
            style: PromptStyle::Prefill,
        };
        let records: Vec<EvalRecord> = (0..10)
            .map(|i| EvalRecord {
                v: RECORD_SCHEMA_VERSION,
                record_id: format!("r{i}"),
                experiment_id: "e".into(),
                replicate: i,
                model: "m".into(),
                condition: Condition::Awm,
                bundle_id: String::new(),
                provenance: provenance.clone(),
                messages: vec![],
                response: Some("word".into()),
                thinking_tokens: None,
                score: Some(Score {
                    correct: i < 4,
                    extracted_answer: "word".into(),
                    failure_kind: if i < 4 {
                        FailureKind::None
                    } else {
                        FailureKind::WrongWord
                    },
                }),
                status: RecordStatus::Ok,
                error: None,
                started_ms: None,
                finished_ms: None,
                attempts: 1,
            })
            .collect();
        aggregate(&records)
    }

    #[test]
    fn report_emits_one_row_per_group() {
        let dir = tempdir().unwrap();
        let summaries = sample_summaries();
        let written = emit_report(&summaries, None, dir.path()).unwrap();
        assert_eq!(written.len(), 1);
        let text = std::fs::read_to_string(&written[0]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("line16"));
        assert!(lines[1].contains("0.400000"));
        // baseline column carries the analytic value
        assert!(lines[1].contains("0.533333"));
    }

    #[test]
    fn plot_data_has_one_row_per_position_layer_metric() {
        let dir = tempdir().unwrap();
        let series = MetricSeries {
            samples: vec![
                MetricSample {
                    context_position: 50,
                    layer_id: 3,
                    dirichlet_energy: Some(0.25),
                    distance_correlation: Some(0.5),
                    degenerate: false,
                },
                MetricSample {
                    context_position: 60,
                    layer_id: 3,
                    dirichlet_energy: None,
                    distance_correlation: None,
                    degenerate: true,
                },
            ],
        };
        let written = emit_report(&sample_summaries(), Some(&series), dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        let text = std::fs::read_to_string(&written[1]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("50,3,dirichlet_energy,0.25"));
        assert!(lines[3].ends_with(",1"));
    }

    #[test]
    fn re_emission_is_byte_identical() {
        let dir = tempdir().unwrap();
        let summaries = sample_summaries();
        emit_report(&summaries, None, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join(SUMMARY_FILE)).unwrap();
        emit_report(&summaries, None, dir.path()).unwrap();
        let second = std::fs::read(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn failed_write_leaves_no_partial_file() {
        let dir = tempdir().unwrap();
        let missing = dir.path().join("nope").join("deep").join("summary.csv");
        // parent directory does not exist: the write fails and no tmp remains
        assert!(write_summary_csv(&missing, &sample_summaries()).is_err());
        assert!(!missing.with_extension("tmp").exists());
    }
}
