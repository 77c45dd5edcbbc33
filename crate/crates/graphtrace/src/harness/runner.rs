//! Experiment execution: replicate planning, generation, dispatch, scoring,
//! and resumable record persistence.

use std::collections::VecDeque;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::oracle::{self, FailureKind, Score};
use crate::seed;
use crate::taskgen::{
    self, Condition, PromptBundle, Provenance, ScoringKey, Seeds, Wordlist,
};

use super::client::HttpChatClient;
use super::config::ExperimentConfig;
use super::records::{record_id, EvalRecord, RecordStatus, RecordWriter, RECORD_SCHEMA_VERSION};
use super::HarnessError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Generate and record without any network calls.
    pub dry_run: bool,
    /// Skip replicates whose records already exist in the output file.
    pub resume: bool,
    /// Process at most this many replicates in this invocation.
    pub limit: Option<usize>,
    /// Dry run that feeds each bundle's own correct answer through scoring;
    /// a config sanity check that must come out at accuracy 1.0.
    pub self_test: bool,
    /// Extra salt mixed into derived replicate seeds.
    pub seed_salt: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub total_replicates: usize,
    pub written: usize,
    pub skipped_existing: usize,
    pub infra_failures: usize,
}

/// The seeds of one replicate. Explicit config seeds apply to single
/// replicate runs; otherwise seeds derive from the experiment id and the
/// replicate index.
pub fn replicate_seeds(config: &ExperimentConfig, replicate: usize, salt: Option<u64>) -> Seeds {
    if salt.is_none() && config.n_replicates == 1 {
        if let Some(explicit) = config.seeds {
            return Seeds {
                walk: explicit.walk,
                words: explicit.words,
                shots: explicit.shots,
            };
        }
    }
    let key = match salt {
        Some(s) => format!("{}#{s}", config.experiment_id),
        None => config.experiment_id.clone(),
    };
    Seeds {
        walk: seed::replicate_seed(&key, replicate, "walk"),
        words: seed::replicate_seed(&key, replicate, "words"),
        shots: seed::replicate_seed(&key, replicate, "shots"),
    }
}

/// Build the provenance that fully determines one replicate's bundle.
pub fn replicate_provenance(
    config: &ExperimentConfig,
    wordlist: &Wordlist,
    replicate: usize,
    salt: Option<u64>,
) -> Result<Provenance, HarnessError> {
    let topology = config.topology()?;
    let n_shots = match config.condition {
        Condition::Awm | Condition::AwmHints | Condition::AwmExplicit => Some(
            config
                .n_shots
                .unwrap_or_else(|| taskgen::default_n_shots(&topology, config.rule.expect("validated"))),
        ),
        Condition::AwmMetalearning => Some(9),
        _ => None,
    };
    Ok(Provenance {
        topology,
        rule: config.rule,
        seeds: replicate_seeds(config, replicate, salt),
        context_length: config.resolve_context_length()?,
        n_shots,
        wordlist_id: wordlist.id.clone(),
        hinted: config.condition == Condition::AwmHints,
        style: config.prompt_style(),
    })
}

pub fn load_wordlist(config: &ExperimentConfig) -> Result<Wordlist, HarnessError> {
    match &config.wordlist {
        Some(path) => Ok(Wordlist::from_file(path)?),
        None => Ok(Wordlist::bundled().clone()),
    }
}

/// Generate the bundle for one replicate.
pub fn replicate_bundle(
    config: &ExperimentConfig,
    wordlist: &Wordlist,
    replicate: usize,
    salt: Option<u64>,
) -> Result<(Provenance, PromptBundle), HarnessError> {
    let provenance = replicate_provenance(config, wordlist, replicate, salt)?;
    let bundle = taskgen::regenerate(config.condition, &provenance, wordlist)?;
    Ok((provenance, bundle))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Score a live response for any condition. State-space descriptions need
/// the judge endpoint; without one they stay unscored.
fn score_response(
    config: &ExperimentConfig,
    bundle: &PromptBundle,
    response: &str,
    judge: Option<&HttpChatClient>,
) -> Result<Option<Score>, HarnessError> {
    match &bundle.scoring_key {
        ScoringKey::StateSpace { .. } => match judge {
            Some(client) => {
                let topology = config.topology()?;
                let prompt = oracle::build_autorater_prompt(response, &topology)?;
                let outcome = client.complete(&prompt.messages)?;
                Ok(Some(match oracle::parse_autorater(&outcome.content) {
                    Some(verdict) => Score {
                        correct: verdict,
                        extracted_answer: if verdict { "yes" } else { "no" }.to_string(),
                        failure_kind: if verdict {
                            FailureKind::None
                        } else {
                            FailureKind::WrongWord
                        },
                    },
                    None => Score {
                        correct: false,
                        extracted_answer: String::new(),
                        failure_kind: FailureKind::Unparseable,
                    },
                }))
            }
            None => Ok(None),
        },
        _ => Ok(oracle::score_with_key(response, bundle.condition, &bundle.scoring_key)),
    }
}

struct Task {
    replicate: usize,
    provenance: Provenance,
    record_id: String,
}

fn offline_record(
    config: &ExperimentConfig,
    wordlist: &Wordlist,
    task: Task,
    self_test: bool,
) -> Result<EvalRecord, HarnessError> {
    let bundle = taskgen::regenerate(config.condition, &task.provenance, wordlist)?;
    let (response, score) = if self_test {
        let answer = bundle.correct_answer();
        let score = match &bundle.scoring_key {
            ScoringKey::StateSpace { description } => {
                Some(oracle::score_describe_local(&answer, description))
            }
            _ => oracle::score_with_key(&answer, bundle.condition, &bundle.scoring_key),
        };
        (Some(answer), score)
    } else {
        (None, None)
    };
    Ok(EvalRecord {
        v: RECORD_SCHEMA_VERSION,
        record_id: task.record_id,
        experiment_id: config.experiment_id.clone(),
        replicate: task.replicate,
        model: config.endpoint.model.clone(),
        condition: bundle.condition,
        bundle_id: bundle.id.clone(),
        provenance: task.provenance,
        messages: bundle.messages,
        response,
        thinking_tokens: None,
        score,
        status: RecordStatus::DryRun,
        error: None,
        started_ms: None,
        finished_ms: None,
        attempts: 0,
    })
}

fn live_record(
    config: &ExperimentConfig,
    wordlist: &Wordlist,
    client: &HttpChatClient,
    judge: Option<&HttpChatClient>,
    task: Task,
) -> Result<EvalRecord, HarnessError> {
    let bundle = taskgen::regenerate(config.condition, &task.provenance, wordlist)?;
    let started_ms = Some(now_ms());
    let outcome = client.complete(&bundle.messages);
    let finished_ms = Some(now_ms());
    let mut record = EvalRecord {
        v: RECORD_SCHEMA_VERSION,
        record_id: task.record_id,
        experiment_id: config.experiment_id.clone(),
        replicate: task.replicate,
        model: config.endpoint.model.clone(),
        condition: bundle.condition,
        bundle_id: bundle.id.clone(),
        provenance: task.provenance.clone(),
        messages: bundle.messages.clone(),
        response: None,
        thinking_tokens: None,
        score: None,
        status: RecordStatus::Ok,
        error: None,
        started_ms,
        finished_ms,
        attempts: 0,
    };
    match outcome {
        Ok(completion) => {
            record.attempts = completion.attempts;
            record.score = score_response(config, &bundle, &completion.content, judge)?;
            record.response = Some(completion.content);
            record.thinking_tokens = completion.thinking_tokens;
        }
        Err(HarnessError::EndpointFailure { attempts, detail }) => {
            record.status = RecordStatus::InfraFailure;
            record.attempts = attempts;
            record.error = Some(detail);
        }
        Err(other) => return Err(other),
    }
    Ok(record)
}

/// Run every replicate of an experiment, appending one terminal record per
/// replicate to the configured output. Already-recorded replicates are
/// skipped on resume; endpoint failures become failure records and the run
/// continues.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let wordlist = load_wordlist(config)?;

    let (mut writer, existing) = if options.resume {
        RecordWriter::resume(&config.output)?
    } else {
        (RecordWriter::create_new(&config.output)?, Default::default())
    };

    let mut plan = VecDeque::new();
    let mut skipped_existing = 0;
    for replicate in 0..config.n_replicates {
        let provenance = replicate_provenance(config, &wordlist, replicate, options.seed_salt)?;
        let id = record_id(&config.experiment_id, replicate, &provenance);
        if existing.contains(&id) {
            skipped_existing += 1;
            continue;
        }
        plan.push_back(Task {
            replicate,
            provenance,
            record_id: id,
        });
    }
    if let Some(limit) = options.limit {
        plan.truncate(limit);
    }

    let mut summary = RunSummary {
        total_replicates: config.n_replicates,
        written: 0,
        skipped_existing,
        infra_failures: 0,
    };

    if options.dry_run || options.self_test {
        for task in plan {
            let record = offline_record(config, &wordlist, task, options.self_test)?;
            writer.append(&record)?;
            summary.written += 1;
        }
        return Ok(summary);
    }

    let client = HttpChatClient::new(config.endpoint.clone())?;
    let judge = config
        .judge
        .clone()
        .map(HttpChatClient::new)
        .transpose()?;

    let workers = config.endpoint.max_in_flight.min(plan.len().max(1));
    let queue = Arc::new(Mutex::new(plan));
    let (sender, receiver) = mpsc::channel::<Result<EvalRecord, HarnessError>>();
    std::thread::scope(|scope| -> Result<(), HarnessError> {
        for _ in 0..workers {
            let queue = Arc::clone(&queue);
            let sender = sender.clone();
            let client = &client;
            let judge = judge.as_ref();
            let wordlist = &wordlist;
            scope.spawn(move || loop {
                let task = { queue.lock().expect("queue lock").pop_front() };
                let Some(task) = task else { break };
                let result = live_record(config, wordlist, client, judge, task);
                if sender.send(result).is_err() {
                    break;
                }
            });
        }
        drop(sender);
        // single writer: appends are serialized through this loop
        for result in receiver {
            let record = result?;
            if record.status == RecordStatus::InfraFailure {
                summary.infra_failures += 1;
            }
            writer.append(&record)?;
            summary.written += 1;
        }
        Ok(())
    })?;

    Ok(summary)
}
