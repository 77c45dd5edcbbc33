//! Append-only, newline-delimited evaluation records with resume support.
//!
//! One JSON record per line, schema-versioned with a `v` field. Resume
//! works by scanning record ids; a torn trailing line (from a crash mid
//! write) is truncated before appending continues, so every surviving line
//! is a terminal record.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::oracle::Score;
use crate::taskgen::{Condition, Message, Provenance};

use super::HarnessError;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    /// A response was obtained and stored.
    Ok,
    /// The endpoint failed after all retries; no response.
    InfraFailure,
    /// Generated without any network call.
    DryRun,
}

/// One model interaction, terminal per (experiment, replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub v: u32,
    pub record_id: String,
    pub experiment_id: String,
    pub replicate: usize,
    pub model: String,
    pub condition: Condition,
    pub bundle_id: String,
    pub provenance: Provenance,
    pub messages: Vec<Message>,
    pub response: Option<String>,
    pub thinking_tokens: Option<u64>,
    pub score: Option<Score>,
    pub status: RecordStatus,
    pub error: Option<String>,
    /// Wall-clock epoch milliseconds; absent in dry runs so identical
    /// configs produce byte-identical record files.
    pub started_ms: Option<u64>,
    pub finished_ms: Option<u64>,
    pub attempts: u32,
}

/// Stable record id: hash of the experiment id, the replicate index, and
/// the provenance that determines the prompt.
pub fn record_id(experiment_id: &str, replicate: usize, provenance: &Provenance) -> String {
    let mut hasher = Sha256::new();
    hasher.update(experiment_id.as_bytes());
    hasher.update((replicate as u64).to_le_bytes());
    hasher.update(
        serde_json::to_string(provenance)
            .expect("provenance serializes")
            .as_bytes(),
    );
    hex::encode(&hasher.finalize()[..8])
}

/// Parse every complete record in a file. Returns the records, the byte
/// length of the valid prefix, and whether a torn trailing line was found.
pub fn scan_records(path: &Path) -> Result<(Vec<EvalRecord>, u64, bool), HarnessError> {
    let mut file = File::open(path)?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    let mut records = Vec::new();
    let mut valid_len = 0u64;
    let mut torn = false;
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let complete = line.ends_with('\n');
        let body = line.trim_end_matches('\n');
        offset += line.len();
        if !complete {
            // no terminating newline: a write cut short mid-record; the
            // writer emits the newline as the last byte of each append, so
            // this can only be the torn tail
            torn = true;
            continue;
        }
        if body.trim().is_empty() {
            valid_len = offset as u64;
            continue;
        }
        match serde_json::from_str::<EvalRecord>(body) {
            Ok(record) => {
                records.push(record);
                valid_len = offset as u64;
            }
            // newline-terminated garbage is corruption, never a torn write
            Err(e) => {
                return Err(HarnessError::CorruptRecords {
                    path: path.to_path_buf(),
                    detail: e.to_string(),
                });
            }
        }
    }
    Ok((records, valid_len, torn))
}

/// Load all records from a file, failing on any torn or corrupt line.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, HarnessError> {
    let (records, _, torn) = scan_records(path)?;
    if torn {
        return Err(HarnessError::CorruptRecords {
            path: path.to_path_buf(),
            detail: "torn trailing line".to_string(),
        });
    }
    Ok(records)
}

/// Serialized append-only writer. All appends go through one instance.
pub struct RecordWriter {
    writer: BufWriter<File>,
}

impl RecordWriter {
    /// Create a fresh record file, refusing to touch an existing one.
    pub fn create_new(path: &Path) -> Result<Self, HarnessError> {
        if path.exists() {
            return Err(HarnessError::OutputExists(path.to_path_buf()));
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = OpenOptions::new().create_new(true).write(true).open(path)?;
        Ok(RecordWriter {
            writer: BufWriter::new(file),
        })
    }

    /// Open a record file for resumption: truncate any torn trailing line
    /// and return the ids of records already present.
    pub fn resume(path: &Path) -> Result<(Self, BTreeSet<String>), HarnessError> {
        if !path.exists() {
            let writer = Self::create_new(path)?;
            return Ok((writer, BTreeSet::new()));
        }
        let (records, valid_len, _) = scan_records(path)?;
        let ids = records.into_iter().map(|r| r.record_id).collect();
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(valid_len)?;
        let mut file = file;
        file.seek(SeekFrom::End(0))?;
        Ok((
            RecordWriter {
                writer: BufWriter::new(file),
            },
            ids,
        ))
    }

    /// Append one record and flush it to disk.
    pub fn append(&mut self, record: &EvalRecord) -> Result<(), HarnessError> {
        let line = serde_json::to_string(record)
            .map_err(|e| HarnessError::Config(format!("record serialization: {e}")))?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::{PromptStyle, Seeds};
    use crate::topology::Topology;
    use tempfile::tempdir;

    fn sample_record(replicate: usize) -> EvalRecord {
        let provenance = Provenance {
            topology: Topology::grid(4).unwrap(),
            rule: None,
            seeds: Seeds {
                walk: 1,
                words: 2,
                shots: 0,
            },
            context_length: 10,
            n_shots: None,
            wordlist_id: "common-nouns-v1".to_string(),
            hinted: false,
            style: PromptStyle::Prefill,
        };
        EvalRecord {
            v: RECORD_SCHEMA_VERSION,
            record_id: record_id("exp", replicate, &provenance),
            experiment_id: "exp".to_string(),
            replicate,
            model: "test-model".to_string(),
            condition: Condition::PrefilledNtp,
            bundle_id: "abc".to_string(),
            provenance,
            messages: vec![],
            response: None,
            thinking_tokens: None,
            score: None,
            status: RecordStatus::DryRun,
            error: None,
            started_ms: None,
            finished_ms: None,
            attempts: 0,
        }
    }

    #[test]
    fn record_ids_are_stable_and_distinct() {
        let a = sample_record(0);
        let b = sample_record(0);
        let c = sample_record(1);
        assert_eq!(a.record_id, b.record_id);
        assert_ne!(a.record_id, c.record_id);
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let mut writer = RecordWriter::create_new(&path).unwrap();
        for r in 0..3 {
            writer.append(&sample_record(r)).unwrap();
        }
        drop(writer);
        let records = read_records(&path).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[2].replicate, 2);
    }

    #[test]
    fn create_new_refuses_existing_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(
            RecordWriter::create_new(&path),
            Err(HarnessError::OutputExists(_))
        ));
    }

    #[test]
    fn resume_truncates_torn_tail() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let mut writer = RecordWriter::create_new(&path).unwrap();
        writer.append(&sample_record(0)).unwrap();
        writer.append(&sample_record(1)).unwrap();
        drop(writer);
        // simulate a crash mid-append
        let mut file = OpenOptions::new().append(true).open(&path).unwrap();
        file.write_all(b"{\"v\":1,\"record_id\":\"trunc").unwrap();
        drop(file);

        let (mut writer, ids) = RecordWriter::resume(&path).unwrap();
        assert_eq!(ids.len(), 2);
        writer.append(&sample_record(2)).unwrap();
        drop(writer);

        let records = read_records(&path).unwrap();
        assert_eq!(records.len(), 3);
        let unique: BTreeSet<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(unique.len(), 3);
    }

    #[test]
    fn corrupt_interior_line_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let line = serde_json::to_string(&sample_record(0)).unwrap();
        std::fs::write(&path, format!("not json\n{line}\n")).unwrap();
        assert!(matches!(
            scan_records(&path),
            Err(HarnessError::CorruptRecords { .. })
        ));
    }

    #[test]
    fn resume_on_missing_file_starts_fresh() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let (mut writer, ids) = RecordWriter::resume(&path).unwrap();
        assert!(ids.is_empty());
        writer.append(&sample_record(0)).unwrap();
        drop(writer);
        assert_eq!(read_records(&path).unwrap().len(), 1);
    }
}
