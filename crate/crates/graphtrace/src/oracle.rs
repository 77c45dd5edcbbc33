//! Exact scoring of model responses, analytic naive baselines, and the
//! autorater prompt.
//!
//! Answer normalization (case folding, punctuation stripping, first-word
//! extraction) is fixed here and versioned with the crate; raw responses are
//! always retained in records so scores can be recomputed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::taskgen::{
    render_template, Condition, Message, PromptBundle, PromptStyle, Provenance, Role, ScoringKey,
    Seeds, WordAssignment, AUTORATER_USER,
};
use crate::topology::{rule_domain, Rule, State, Topology, TopologyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    None,
    Unparseable,
    InvalidWord,
    WrongWord,
}

/// Outcome of scoring one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub correct: bool,
    pub extracted_answer: String,
    pub failure_kind: FailureKind,
}

impl Score {
    fn unparseable() -> Self {
        Score {
            correct: false,
            extracted_answer: String::new(),
            failure_kind: FailureKind::Unparseable,
        }
    }
}

/// Words of all states adjacent to the final state of a rendered sequence.
pub fn valid_next_words(
    states: &[State],
    assignment: &WordAssignment,
    topology: &Topology,
) -> BTreeSet<String> {
    let Some(&last) = states.last() else {
        return BTreeSet::new();
    };
    topology
        .neighbors(last)
        .into_iter()
        .map(|s| assignment.word(s).to_string())
        .collect()
}

fn normalize_word(raw: &str) -> Option<String> {
    let trimmed: String = raw
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed)
    }
}

fn first_word(text: &str) -> Option<String> {
    text.split_whitespace().find_map(normalize_word)
}

/// Extract the answer word from a raw response.
///
/// Instruction prompts ask for an `[ANSWER]` marker; the answer is the first
/// word after the final marker, falling back to the first word of the
/// response. All other conditions score the first whitespace-delimited word.
/// Answers are lowercased with surrounding punctuation stripped.
pub fn extract_answer(response_text: &str, condition: Condition) -> Option<String> {
    match condition {
        Condition::InstructionNtp => match response_text.rfind("[ANSWER]") {
            Some(idx) => first_word(&response_text[idx + "[ANSWER]".len()..]),
            None => first_word(response_text),
        },
        _ => first_word(response_text),
    }
}

fn classify(answer: String, correct: bool, vocabulary: &BTreeSet<String>) -> Score {
    let failure_kind = if correct {
        FailureKind::None
    } else if vocabulary.contains(&answer) {
        FailureKind::WrongWord
    } else {
        FailureKind::InvalidWord
    };
    Score {
        correct,
        extracted_answer: answer,
        failure_kind,
    }
}

/// Score a next-word prediction response: correct iff the extracted answer
/// is in the valid-word set.
pub fn score_ntp(
    response_text: &str,
    condition: Condition,
    valid: &BTreeSet<String>,
    vocabulary: &BTreeSet<String>,
) -> Score {
    match extract_answer(response_text, condition) {
        None => Score::unparseable(),
        Some(answer) => {
            let correct = valid.contains(&answer);
            classify(answer, correct, vocabulary)
        }
    }
}

/// Score a world-modeling response: exact match against the expected word.
pub fn score_awm(response_text: &str, expected: &str, vocabulary: &BTreeSet<String>) -> Score {
    match extract_answer(response_text, Condition::Awm) {
        None => Score::unparseable(),
        Some(answer) => {
            let correct = answer == expected;
            classify(answer, correct, vocabulary)
        }
    }
}

/// Score any bundle's response against its own scoring key. State-space
/// descriptions cannot be scored without a judge and return `None`.
pub fn score_with_key(response_text: &str, condition: Condition, key: &ScoringKey) -> Option<Score> {
    match key {
        ScoringKey::NextWord { valid, vocabulary } => {
            Some(score_ntp(response_text, condition, valid, vocabulary))
        }
        ScoringKey::ExactWord { expected, vocabulary } => {
            Some(score_awm(response_text, expected, vocabulary))
        }
        ScoringKey::StateSpace { .. } => None,
    }
}

/// Deterministic local scorer for state-space descriptions: correct iff the
/// text literally mentions the topology label (e.g. "4-by-4 grid").
///
/// Live runs use the configured judge model instead; this is the fallback
/// for self-tests and offline checks, strictly less permissive than a judge.
pub fn score_describe_local(response_text: &str, description: &str) -> Score {
    let text = response_text.to_lowercase();
    if text.trim().is_empty() {
        return Score::unparseable();
    }
    let correct = text.contains(&description.to_lowercase());
    Score {
        correct,
        extracted_answer: description.to_string(),
        failure_kind: if correct {
            FailureKind::None
        } else {
            FailureKind::WrongWord
        },
    }
}

/// Accuracy of guessing uniformly among a query state's attested adjacent
/// states. Only meaningful for the one-step rule, whose transitions are
/// attested in the walk; other rules get the uniform-guess floor `1/N`.
pub fn naive_baseline(topology: &Topology, rule: Rule) -> f64 {
    match rule {
        Rule::OneStep => {
            let domain = rule_domain(topology, rule).expect("one_step applies to all topologies");
            let sum: f64 = domain
                .iter()
                .map(|&s| 1.0 / topology.degree(s) as f64)
                .sum();
            sum / domain.len() as f64
        }
        _ => 1.0 / topology.state_count() as f64,
    }
}

/// Build the judge prompt: a single user message embedding the model's
/// description and asking for a yes/no verdict on whether it references an
/// N-by-N grid.
pub fn build_autorater_prompt(
    model_description: &str,
    topology: &Topology,
) -> Result<PromptBundle, crate::taskgen::TaskGenError> {
    if topology.kind != TopologyKind::Grid {
        return Err(crate::taskgen::TaskGenError::NeedsGrid(Condition::Autorater));
    }
    let side = topology.size.to_string();
    let text = render_template(
        AUTORATER_USER,
        &[("side", side.as_str()), ("description", model_description)],
    );
    let provenance = Provenance {
        topology: *topology,
        rule: None,
        seeds: Seeds {
            walk: 0,
            words: 0,
            shots: 0,
        },
        context_length: 0,
        n_shots: None,
        wordlist_id: String::new(),
        hinted: false,
        style: PromptStyle::Prefill,
    };
    let scoring_key = ScoringKey::StateSpace {
        description: topology.label(),
    };
    // ids of autorater bundles hash the judged description as well, since
    // provenance alone does not determine the prompt
    let mut bundle = PromptBundle {
        id: String::new(),
        condition: Condition::Autorater,
        messages: vec![Message {
            role: Role::User,
            text,
        }],
        scoring_key,
        provenance,
    };
    let mut hasher = sha2::Sha256::new();
    use sha2::Digest;
    hasher.update(bundle.messages[0].text.as_bytes());
    bundle.id = hex::encode(&hasher.finalize()[..8]);
    Ok(bundle)
}

/// Parse the judge's verdict: a case-insensitive leading yes/no. Anything
/// else is unparseable.
pub fn parse_autorater(response_text: &str) -> Option<bool> {
    match first_word(response_text)?.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}
