//! Prompt bundles: every task condition rendered as role-tagged messages
//! plus the key needed to score a response.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::oracle::valid_next_words;
use crate::seed;
use crate::topology::{apply_rule, rule_domain, Rule, State, Topology, TopologyKind};

use super::templates as tpl;
use super::walk::{generate_adjacency_pairs, generate_walk, WalkSequence};
use super::words::{assign_words, WordAssignment, Wordlist};
use super::TaskGenError;

/// Walk length of each presentation in the metalearning variant.
pub const METALEARNING_WALK_LEN: usize = 500;
/// Shots per presentation in the metalearning variant.
pub const METALEARNING_SHOTS_PER_BLOCK: usize = 3;
const METALEARNING_BLOCKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    InstructionNtp,
    PrefilledNtp,
    Awm,
    AwmExplicit,
    AwmMetalearning,
    AwmHints,
    DescribeStateSpace,
    Autorater,
}

impl Condition {
    pub fn is_awm_family(&self) -> bool {
        matches!(
            self,
            Condition::Awm | Condition::AwmExplicit | Condition::AwmMetalearning | Condition::AwmHints
        )
    }

    /// Whether the rendered conversation ends in a prefilled response that
    /// the model continues directly.
    pub fn uses_prefill(&self, style: PromptStyle) -> bool {
        match self {
            Condition::InstructionNtp | Condition::DescribeStateSpace | Condition::Autorater => {
                false
            }
            Condition::PrefilledNtp => true,
            _ => style == PromptStyle::Prefill,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    AssistantPrefill,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

/// What a correct response looks like, by condition family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoringKey {
    /// Next-word prediction: any word of a state adjacent to the final
    /// rendered state is correct.
    NextWord {
        valid: BTreeSet<String>,
        vocabulary: BTreeSet<String>,
    },
    /// World modeling: exactly one word is correct.
    ExactWord {
        expected: String,
        vocabulary: BTreeSet<String>,
    },
    /// State-space description, judged by the autorater against this label.
    StateSpace { description: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub walk: u64,
    pub words: u64,
    pub shots: u64,
}

/// Whether world-modeling prompts put the walk in a prefilled response
/// (the default) or fold everything into the user message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    Prefill,
    UserMessage,
}

/// Everything needed to regenerate a bundle byte-for-byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub topology: Topology,
    pub rule: Option<Rule>,
    pub seeds: Seeds,
    /// Walk words for grids, adjacent pairs for lines; 0 when no walk.
    pub context_length: usize,
    pub n_shots: Option<usize>,
    pub wordlist_id: String,
    pub hinted: bool,
    pub style: PromptStyle,
}

/// A fully rendered conversation plus its scoring key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub id: String,
    pub condition: Condition,
    pub messages: Vec<Message>,
    pub scoring_key: ScoringKey,
    pub provenance: Provenance,
}

impl PromptBundle {
    fn new(
        condition: Condition,
        messages: Vec<Message>,
        scoring_key: ScoringKey,
        provenance: Provenance,
    ) -> Self {
        let id = bundle_id(condition, &provenance);
        PromptBundle {
            id,
            condition,
            messages,
            scoring_key,
            provenance,
        }
    }

    /// An answer guaranteed to score as correct; used by the self-test
    /// round trip.
    pub fn correct_answer(&self) -> String {
        match &self.scoring_key {
            ScoringKey::NextWord { valid, .. } => {
                valid.iter().next().cloned().unwrap_or_default()
            }
            ScoringKey::ExactWord { expected, .. } => expected.clone(),
            ScoringKey::StateSpace { description } => {
                format!("The words appear to be arranged in a {description}.")
            }
        }
    }
}

fn bundle_id(condition: Condition, provenance: &Provenance) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(&condition).expect("condition serializes").as_bytes());
    hasher.update(serde_json::to_string(provenance).expect("provenance serializes").as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

fn check_assignment(walk: &WalkSequence, assignment: &WordAssignment) -> Result<(), TaskGenError> {
    if walk.topology.state_count() != assignment.state_count() {
        return Err(TaskGenError::AssignmentMismatch {
            walk: walk.topology.state_count(),
            assignment: assignment.state_count(),
        });
    }
    Ok(())
}

fn join_words(states: &[State], assignment: &WordAssignment) -> String {
    states
        .iter()
        .map(|&s| assignment.word(s))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Default shot count: 10, except 6 on the 4-by-4 grid two-step rule whose
/// domain only has 8 well-defined inputs.
pub fn default_n_shots(topology: &Topology, rule: Rule) -> usize {
    if topology.kind == TopologyKind::Grid && topology.size == 4 && rule == Rule::TwoStep {
        6
    } else {
        10
    }
}

/// Sample `count` distinct rule inputs, uniformly without replacement.
fn sample_rule_inputs(
    topology: &Topology,
    rule: Rule,
    count: usize,
    seed: u64,
) -> Result<Vec<State>, TaskGenError> {
    let domain = rule_domain(topology, rule)?;
    if count > domain.len() {
        return Err(TaskGenError::InsufficientExamples {
            needed: count,
            domain: domain.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut pool = domain;
    for k in 0..count {
        let pick = rng.random_range(k..pool.len());
        pool.swap(k, pick);
    }
    pool.truncate(count);
    Ok(pool)
}

fn shot_lines(
    topology: &Topology,
    rule: Rule,
    inputs: &[State],
    assignment: &WordAssignment,
) -> Result<String, TaskGenError> {
    let lines: Result<Vec<String>, TaskGenError> = inputs
        .iter()
        .map(|&s| {
            let out = apply_rule(topology, rule, s)?.expect("input drawn from rule domain");
            Ok(format!("{} -> {}", assignment.word(s), assignment.word(out)))
        })
        .collect();
    Ok(lines?.join("\n"))
}

/// Render the next-word prediction task in the instruction or prefilled
/// condition. The scoring key is the set of words adjacent to the final
/// rendered state, identical across the two layouts.
pub fn render_ntp_prompt(
    walk: &WalkSequence,
    assignment: &WordAssignment,
    condition: Condition,
) -> Result<PromptBundle, TaskGenError> {
    check_assignment(walk, assignment)?;
    if walk.states.is_empty() {
        return Err(TaskGenError::EmptyWalk);
    }
    let surface = walk.ntp_surface();
    let walk_words = join_words(surface, assignment);
    let messages = match condition {
        Condition::InstructionNtp => vec![Message {
            role: Role::User,
            text: tpl::render_template(tpl::INSTRUCTION_NTP_USER, &[("walk_words", &walk_words)]),
        }],
        Condition::PrefilledNtp => vec![
            Message {
                role: Role::User,
                text: tpl::PREFILLED_NTP_USER.to_string(),
            },
            Message {
                role: Role::AssistantPrefill,
                text: tpl::render_template(
                    tpl::PREFILLED_NTP_PREFILL,
                    &[("walk_words", &walk_words)],
                ),
            },
        ],
        other => return Err(TaskGenError::NotAwmFamily(other)),
    };
    let scoring_key = ScoringKey::NextWord {
        valid: valid_next_words(surface, assignment, &walk.topology),
        vocabulary: assignment.vocabulary(),
    };
    let provenance = Provenance {
        topology: walk.topology,
        rule: None,
        seeds: Seeds {
            walk: walk.seed,
            words: assignment.seed,
            shots: 0,
        },
        context_length: walk.context_length(),
        n_shots: None,
        wordlist_id: assignment.wordlist_id.clone(),
        hinted: false,
        style: PromptStyle::Prefill,
    };
    Ok(PromptBundle::new(condition, messages, scoring_key, provenance))
}

/// Render the world-modeling task: walk context, `n_shots` example mappings
/// over distinct rule inputs, and a held-out query.
pub fn render_awm_prompt(
    walk: &WalkSequence,
    assignment: &WordAssignment,
    rule: Rule,
    n_shots: usize,
    seed: u64,
) -> Result<PromptBundle, TaskGenError> {
    render_awm_prompt_with_style(walk, assignment, rule, n_shots, seed, PromptStyle::Prefill)
}

/// As [`render_awm_prompt`], with an explicit prompt style. `UserMessage`
/// folds instructions, walk, and shots into a single user message.
pub fn render_awm_prompt_with_style(
    walk: &WalkSequence,
    assignment: &WordAssignment,
    rule: Rule,
    n_shots: usize,
    seed: u64,
    style: PromptStyle,
) -> Result<PromptBundle, TaskGenError> {
    check_assignment(walk, assignment)?;
    let sampled = sample_rule_inputs(&walk.topology, rule, n_shots + 1, seed)?;
    let (shots, query) = (&sampled[..n_shots], sampled[n_shots]);
    let walk_words = join_words(&walk.states, assignment);
    let lines = shot_lines(&walk.topology, rule, shots, assignment)?;
    let query_word = assignment.word(query);
    let substitutions = [
        ("walk_words", walk_words.as_str()),
        ("shot_lines", lines.as_str()),
        ("query_word", query_word),
    ];
    let messages = match style {
        PromptStyle::Prefill => vec![
            Message {
                role: Role::User,
                text: tpl::AWM_USER.to_string(),
            },
            Message {
                role: Role::AssistantPrefill,
                text: tpl::render_template(tpl::AWM_PREFILL, &substitutions),
            },
        ],
        PromptStyle::UserMessage => vec![Message {
            role: Role::User,
            text: tpl::render_template(tpl::AWM_USER_MESSAGE, &substitutions),
        }],
    };
    let expected_state =
        apply_rule(&walk.topology, rule, query)?.expect("query drawn from rule domain");
    let scoring_key = ScoringKey::ExactWord {
        expected: assignment.word(expected_state).to_string(),
        vocabulary: assignment.vocabulary(),
    };
    let provenance = Provenance {
        topology: walk.topology,
        rule: Some(rule),
        seeds: Seeds {
            walk: walk.seed,
            words: assignment.seed,
            shots: seed,
        },
        context_length: walk.context_length(),
        n_shots: Some(n_shots),
        wordlist_id: assignment.wordlist_id.clone(),
        hinted: false,
        style,
    };
    Ok(PromptBundle::new(Condition::Awm, messages, scoring_key, provenance))
}

/// Render the explicit-topology control: the grid is spelled out as
/// `Coordinates: i j Item: word` lines instead of a walk.
pub fn render_explicit_prompt(
    topology: &Topology,
    assignment: &WordAssignment,
    rule: Rule,
    n_shots: usize,
    seed: u64,
) -> Result<PromptBundle, TaskGenError> {
    if topology.kind != TopologyKind::Grid {
        return Err(TaskGenError::NeedsGrid(Condition::AwmExplicit));
    }
    if topology.state_count() != assignment.state_count() {
        return Err(TaskGenError::AssignmentMismatch {
            walk: topology.state_count(),
            assignment: assignment.state_count(),
        });
    }
    let sampled = sample_rule_inputs(topology, rule, n_shots + 1, seed)?;
    let (shots, query) = (&sampled[..n_shots], sampled[n_shots]);
    let coordinate_lines = (0..topology.state_count())
        .map(|s| {
            let (i, j) = topology.coords(s);
            format!("Coordinates: {i} {j} Item: {}", assignment.word(s))
        })
        .collect::<Vec<_>>()
        .join("\n");
    let lines = shot_lines(topology, rule, shots, assignment)?;
    let query_word = assignment.word(query);
    let messages = vec![
        Message {
            role: Role::User,
            text: tpl::AWM_USER.to_string(),
        },
        Message {
            role: Role::AssistantPrefill,
            text: tpl::render_template(
                tpl::AWM_EXPLICIT_PREFILL,
                &[
                    ("coordinate_lines", coordinate_lines.as_str()),
                    ("shot_lines", lines.as_str()),
                    ("query_word", query_word),
                ],
            ),
        },
    ];
    let expected_state = apply_rule(topology, rule, query)?.expect("query drawn from rule domain");
    let scoring_key = ScoringKey::ExactWord {
        expected: assignment.word(expected_state).to_string(),
        vocabulary: assignment.vocabulary(),
    };
    let provenance = Provenance {
        topology: *topology,
        rule: Some(rule),
        seeds: Seeds {
            walk: 0,
            words: assignment.seed,
            shots: seed,
        },
        context_length: 0,
        n_shots: Some(n_shots),
        wordlist_id: assignment.wordlist_id.clone(),
        hinted: false,
        style: PromptStyle::Prefill,
    };
    Ok(PromptBundle::new(
        Condition::AwmExplicit,
        messages,
        scoring_key,
        provenance,
    ))
}

/// Render the metalearning variant: three presentations, each a 500-step
/// walk over the same grid and word assignment followed by 3 shots of the
/// same rule, then a held-out query.
pub fn render_metalearning_prompt(
    topology: &Topology,
    assignment: &WordAssignment,
    rule: Rule,
    seed: u64,
) -> Result<PromptBundle, TaskGenError> {
    if topology.kind != TopologyKind::Grid {
        return Err(TaskGenError::NeedsGrid(Condition::AwmMetalearning));
    }
    if topology.state_count() != assignment.state_count() {
        return Err(TaskGenError::AssignmentMismatch {
            walk: topology.state_count(),
            assignment: assignment.state_count(),
        });
    }
    let total_shots = METALEARNING_BLOCKS * METALEARNING_SHOTS_PER_BLOCK;
    let sampled = sample_rule_inputs(topology, rule, total_shots + 1, seed::derive(seed, "ml-shots"))?;
    let (shots, query) = (&sampled[..total_shots], sampled[total_shots]);

    let mut substitutions: Vec<(&str, String)> = Vec::new();
    let block_names = ["presentation_1", "presentation_2", "presentation_3"];
    for (k, name) in block_names.iter().enumerate() {
        let walk = generate_walk(
            topology,
            METALEARNING_WALK_LEN,
            seed::derive(seed, &format!("ml-walk-{k}")),
        )?;
        let walk_words = join_words(&walk.states, assignment);
        let block_shots =
            &shots[k * METALEARNING_SHOTS_PER_BLOCK..(k + 1) * METALEARNING_SHOTS_PER_BLOCK];
        let lines = shot_lines(topology, rule, block_shots, assignment)?;
        substitutions.push((name, format!("{walk_words}\n\n{lines}")));
    }
    let query_word = assignment.word(query).to_string();
    substitutions.push(("query_word", query_word));
    let subs: Vec<(&str, &str)> = substitutions
        .iter()
        .map(|(n, v)| (*n, v.as_str()))
        .collect();
    let messages = vec![
        Message {
            role: Role::User,
            text: tpl::AWM_USER.to_string(),
        },
        Message {
            role: Role::AssistantPrefill,
            text: tpl::render_template(tpl::AWM_METALEARNING_PREFILL, &subs),
        },
    ];
    let expected_state = apply_rule(topology, rule, query)?.expect("query drawn from rule domain");
    let scoring_key = ScoringKey::ExactWord {
        expected: assignment.word(expected_state).to_string(),
        vocabulary: assignment.vocabulary(),
    };
    let provenance = Provenance {
        topology: *topology,
        rule: Some(rule),
        seeds: Seeds {
            walk: seed,
            words: assignment.seed,
            shots: seed,
        },
        context_length: METALEARNING_WALK_LEN,
        n_shots: Some(total_shots),
        wordlist_id: assignment.wordlist_id.clone(),
        hinted: false,
        style: PromptStyle::Prefill,
    };
    Ok(PromptBundle::new(
        Condition::AwmMetalearning,
        messages,
        scoring_key,
        provenance,
    ))
}

/// Prepend a hint naming the state-space shape and the positional nature of
/// the rule (never the offset itself). Idempotent; the scoring key is
/// untouched.
pub fn render_hints(
    bundle: &PromptBundle,
    topology: &Topology,
    rule: Rule,
) -> Result<PromptBundle, TaskGenError> {
    if !bundle.condition.is_awm_family() {
        return Err(TaskGenError::NotAwmFamily(bundle.condition));
    }
    debug_assert_eq!(bundle.provenance.topology, *topology);
    debug_assert_eq!(bundle.provenance.rule, Some(rule));
    if bundle.provenance.hinted {
        return Ok(bundle.clone());
    }
    let hint = tpl::render_template(tpl::HINT_PREAMBLE, &[("shape", &topology.label())]);
    let mut messages = bundle.messages.clone();
    let user = messages
        .iter_mut()
        .find(|m| m.role == Role::User)
        .expect("bundles always carry a user message");
    user.text = format!("{hint}\n\n{}", user.text);
    let mut provenance = bundle.provenance.clone();
    provenance.hinted = true;
    let condition = if bundle.condition == Condition::Awm {
        Condition::AwmHints
    } else {
        bundle.condition
    };
    Ok(PromptBundle::new(
        condition,
        messages,
        bundle.scoring_key.clone(),
        provenance,
    ))
}

/// Render the probe that asks the model to describe the latent transition
/// structure behind a walk. Scored downstream by the autorater.
pub fn render_describe_prompt(
    walk: &WalkSequence,
    assignment: &WordAssignment,
) -> Result<PromptBundle, TaskGenError> {
    check_assignment(walk, assignment)?;
    if walk.topology.kind != TopologyKind::Grid {
        return Err(TaskGenError::NeedsGrid(Condition::DescribeStateSpace));
    }
    let walk_words = join_words(&walk.states, assignment);
    let messages = vec![Message {
        role: Role::User,
        text: tpl::render_template(tpl::DESCRIBE_USER, &[("walk_words", &walk_words)]),
    }];
    let scoring_key = ScoringKey::StateSpace {
        description: walk.topology.label(),
    };
    let provenance = Provenance {
        topology: walk.topology,
        rule: None,
        seeds: Seeds {
            walk: walk.seed,
            words: assignment.seed,
            shots: 0,
        },
        context_length: walk.context_length(),
        n_shots: None,
        wordlist_id: assignment.wordlist_id.clone(),
        hinted: false,
        style: PromptStyle::Prefill,
    };
    Ok(PromptBundle::new(
        Condition::DescribeStateSpace,
        messages,
        scoring_key,
        provenance,
    ))
}

/// Rebuild a bundle from its provenance. Reproduces the original
/// byte-for-byte, including the scoring key.
pub fn regenerate(
    condition: Condition,
    provenance: &Provenance,
    wordlist: &Wordlist,
) -> Result<PromptBundle, TaskGenError> {
    if wordlist.id != provenance.wordlist_id {
        return Err(TaskGenError::WordlistMismatch {
            expected: provenance.wordlist_id.clone(),
            actual: wordlist.id.clone(),
        });
    }
    let topology = provenance.topology;
    let assignment = assign_words(&topology, wordlist, provenance.seeds.words)?;
    let make_walk = |length: usize| match topology.kind {
        TopologyKind::Grid => generate_walk(&topology, length, provenance.seeds.walk),
        TopologyKind::Line => generate_adjacency_pairs(&topology, length, provenance.seeds.walk),
    };
    let rule_of = || provenance.rule.ok_or(TaskGenError::NotRegenerable(condition));
    let bundle = match condition {
        Condition::InstructionNtp | Condition::PrefilledNtp => {
            render_ntp_prompt(&make_walk(provenance.context_length)?, &assignment, condition)?
        }
        Condition::Awm | Condition::AwmHints => {
            let rule = rule_of()?;
            let walk = make_walk(provenance.context_length)?;
            let n_shots = provenance
                .n_shots
                .unwrap_or_else(|| default_n_shots(&topology, rule));
            let base = render_awm_prompt_with_style(
                &walk,
                &assignment,
                rule,
                n_shots,
                provenance.seeds.shots,
                provenance.style,
            )?;
            if condition == Condition::AwmHints || provenance.hinted {
                render_hints(&base, &topology, rule)?
            } else {
                base
            }
        }
        Condition::AwmExplicit => {
            let rule = rule_of()?;
            let n_shots = provenance
                .n_shots
                .unwrap_or_else(|| default_n_shots(&topology, rule));
            let base =
                render_explicit_prompt(&topology, &assignment, rule, n_shots, provenance.seeds.shots)?;
            if provenance.hinted {
                render_hints(&base, &topology, rule)?
            } else {
                base
            }
        }
        Condition::AwmMetalearning => {
            let rule = rule_of()?;
            let base =
                render_metalearning_prompt(&topology, &assignment, rule, provenance.seeds.shots)?;
            if provenance.hinted {
                render_hints(&base, &topology, rule)?
            } else {
                base
            }
        }
        Condition::DescribeStateSpace => {
            render_describe_prompt(&make_walk(provenance.context_length)?, &assignment)?
        }
        Condition::Autorater => return Err(TaskGenError::NotRegenerable(condition)),
    };
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::walk::WalkKind;

    fn line16_walk_ending_at_s3() -> (Topology, WalkSequence) {
        let l16 = Topology::line(16).unwrap();
        // two pairs; the surface drops the trailing 4 and ends at state 3
        let walk = WalkSequence {
            kind: WalkKind::AdjacencyPairs,
            topology: l16,
            states: vec![7, 8, 3, 4],
            seed: 0,
        };
        (l16, walk)
    }

    #[test]
    fn prefilled_line_key_is_both_neighbors() {
        let (l16, walk) = line16_walk_ending_at_s3();
        let assignment = assign_words(&l16, Wordlist::bundled(), 5).unwrap();
        let bundle = render_ntp_prompt(&walk, &assignment, Condition::PrefilledNtp).unwrap();
        let expected: BTreeSet<String> = [assignment.word(2), assignment.word(4)]
            .iter()
            .map(|w| w.to_string())
            .collect();
        match &bundle.scoring_key {
            ScoringKey::NextWord { valid, .. } => assert_eq!(valid, &expected),
            other => panic!("unexpected key {other:?}"),
        }
        assert_eq!(bundle.messages.len(), 2);
        assert_eq!(bundle.messages[1].role, Role::AssistantPrefill);
        assert!(!bundle.messages[1].text.contains(assignment.word(4)));
    }

    #[test]
    fn instruction_layout_differs_but_key_matches() {
        let (l16, walk) = line16_walk_ending_at_s3();
        let assignment = assign_words(&l16, Wordlist::bundled(), 5).unwrap();
        let prefilled = render_ntp_prompt(&walk, &assignment, Condition::PrefilledNtp).unwrap();
        let instructed = render_ntp_prompt(&walk, &assignment, Condition::InstructionNtp).unwrap();
        assert_eq!(prefilled.scoring_key, instructed.scoring_key);
        assert_eq!(instructed.messages.len(), 1);
        assert_eq!(instructed.messages[0].role, Role::User);
        assert!(instructed.messages[0].text.contains("[ANSWER]"));
    }

    #[test]
    fn awm_grid4_two_step_has_six_shots() {
        let g4 = Topology::grid(4).unwrap();
        let assignment = assign_words(&g4, Wordlist::bundled(), 1).unwrap();
        let walk = generate_walk(&g4, 50, 2).unwrap();
        let n = default_n_shots(&g4, Rule::TwoStep);
        assert_eq!(n, 6);
        let bundle = render_awm_prompt(&walk, &assignment, Rule::TwoStep, n, 3).unwrap();
        let prefill = &bundle.messages[1].text;
        let arrow_lines = prefill.lines().filter(|l| l.contains(" -> ")).count();
        assert_eq!(arrow_lines, 6);
        assert!(prefill.trim_end().ends_with("->"));
    }

    #[test]
    fn awm_query_is_held_out_and_key_matches_rule() {
        let g5 = Topology::grid(5).unwrap();
        let assignment = assign_words(&g5, Wordlist::bundled(), 7).unwrap();
        let walk = generate_walk(&g5, 100, 8).unwrap();
        for seed in 0..50u64 {
            let bundle =
                render_awm_prompt(&walk, &assignment, Rule::OneStep, 10, seed).unwrap();
            let prefill = &bundle.messages[1].text;
            let query_word = prefill
                .lines()
                .last()
                .unwrap()
                .split_whitespace()
                .next()
                .unwrap();
            let query = assignment.state_of(query_word).unwrap();
            for line in prefill.lines().filter(|l| l.contains(" -> ")) {
                let input = line.split(" -> ").next().unwrap();
                assert_ne!(input, query_word, "seed {seed}");
            }
            let expected = apply_rule(&g5, Rule::OneStep, query).unwrap().unwrap();
            match &bundle.scoring_key {
                ScoringKey::ExactWord { expected: w, .. } => {
                    assert_eq!(w, assignment.word(expected));
                }
                other => panic!("unexpected key {other:?}"),
            }
        }
    }

    #[test]
    fn awm_insufficient_examples() {
        let g4 = Topology::grid(4).unwrap();
        let assignment = assign_words(&g4, Wordlist::bundled(), 1).unwrap();
        let walk = generate_walk(&g4, 50, 2).unwrap();
        assert!(matches!(
            render_awm_prompt(&walk, &assignment, Rule::TwoStep, 8, 3),
            Err(TaskGenError::InsufficientExamples { needed: 9, domain: 8 })
        ));
    }

    #[test]
    fn user_message_style_has_no_prefill() {
        let g5 = Topology::grid(5).unwrap();
        let assignment = assign_words(&g5, Wordlist::bundled(), 7).unwrap();
        let walk = generate_walk(&g5, 50, 8).unwrap();
        let bundle = render_awm_prompt_with_style(
            &walk,
            &assignment,
            Rule::TwoStep,
            10,
            3,
            PromptStyle::UserMessage,
        )
        .unwrap();
        assert_eq!(bundle.messages.len(), 1);
        assert_eq!(bundle.messages[0].role, Role::User);
        // same seeds produce the same shots and key in either style
        let prefill_style =
            render_awm_prompt(&walk, &assignment, Rule::TwoStep, 10, 3).unwrap();
        assert_eq!(bundle.scoring_key, prefill_style.scoring_key);
    }

    #[test]
    fn explicit_prompt_lists_every_state() {
        let g4 = Topology::grid(4).unwrap();
        let assignment = assign_words(&g4, Wordlist::bundled(), 9).unwrap();
        let bundle =
            render_explicit_prompt(&g4, &assignment, Rule::TwoStep, 6, 11).unwrap();
        let prefill = &bundle.messages[1].text;
        let coord_lines: Vec<&str> = prefill
            .lines()
            .filter(|l| l.starts_with("Coordinates:"))
            .collect();
        assert_eq!(coord_lines.len(), 16);
        assert_eq!(
            coord_lines[0],
            format!("Coordinates: 0 0 Item: {}", assignment.word(0))
        );
        assert_eq!(
            coord_lines[5],
            format!("Coordinates: 1 1 Item: {}", assignment.word(5))
        );
        let query_word = prefill
            .lines()
            .last()
            .unwrap()
            .split_whitespace()
            .next()
            .unwrap();
        let query = assignment.state_of(query_word).unwrap();
        let expected = apply_rule(&g4, Rule::TwoStep, query).unwrap().unwrap();
        match &bundle.scoring_key {
            ScoringKey::ExactWord { expected: w, .. } => assert_eq!(w, assignment.word(expected)),
            other => panic!("unexpected key {other:?}"),
        }
    }

    #[test]
    fn explicit_prompt_needs_grid() {
        let l16 = Topology::line(16).unwrap();
        let assignment = assign_words(&l16, Wordlist::bundled(), 9).unwrap();
        assert!(matches!(
            render_explicit_prompt(&l16, &assignment, Rule::OneStep, 10, 1),
            Err(TaskGenError::NeedsGrid(Condition::AwmExplicit))
        ));
    }

    #[test]
    fn metalearning_structure() {
        let g5 = Topology::grid(5).unwrap();
        let assignment = assign_words(&g5, Wordlist::bundled(), 13).unwrap();
        let bundle = render_metalearning_prompt(&g5, &assignment, Rule::TwoStep, 21).unwrap();
        let prefill = &bundle.messages[1].text;
        let shot_count = prefill.lines().filter(|l| l.contains(" -> ")).count();
        assert_eq!(shot_count, 9);
        // three 500-word walks
        let blocks: Vec<&str> = prefill.split("\n\n").collect();
        let walk_blocks: Vec<&str> = blocks
            .iter()
            .copied()
            .filter(|b| !b.contains(" -> ") && b.split_whitespace().count() == 500)
            .collect();
        assert_eq!(walk_blocks.len(), 3);
        // query held out from all nine shots
        let query_word = prefill
            .lines()
            .last()
            .unwrap()
            .split_whitespace()
            .next()
            .unwrap();
        for line in prefill.lines().filter(|l| l.contains(" -> ")) {
            assert_ne!(line.split(" -> ").next().unwrap(), query_word);
        }
    }

    #[test]
    fn hints_mention_shape_and_preserve_key() {
        let g5 = Topology::grid(5).unwrap();
        let assignment = assign_words(&g5, Wordlist::bundled(), 3).unwrap();
        let walk = generate_walk(&g5, 60, 4).unwrap();
        let base = render_awm_prompt(&walk, &assignment, Rule::TwoStep, 10, 5).unwrap();
        let hinted = render_hints(&base, &g5, Rule::TwoStep).unwrap();
        assert_eq!(hinted.condition, Condition::AwmHints);
        assert!(hinted.messages[0].text.contains("5-by-5"));
        assert!(!hinted.messages[0].text.contains("two"));
        assert_eq!(hinted.scoring_key, base.scoring_key);
        let twice = render_hints(&hinted, &g5, Rule::TwoStep).unwrap();
        assert_eq!(twice, hinted);
    }

    #[test]
    fn hints_reject_ntp_bundles() {
        let (l16, walk) = line16_walk_ending_at_s3();
        let assignment = assign_words(&l16, Wordlist::bundled(), 5).unwrap();
        let bundle = render_ntp_prompt(&walk, &assignment, Condition::PrefilledNtp).unwrap();
        assert!(matches!(
            render_hints(&bundle, &l16, Rule::OneStep),
            Err(TaskGenError::NotAwmFamily(Condition::PrefilledNtp))
        ));
    }

    #[test]
    fn describe_prompt_records_topology_descriptor() {
        let g4 = Topology::grid(4).unwrap();
        let assignment = assign_words(&g4, Wordlist::bundled(), 3).unwrap();
        let walk = generate_walk(&g4, 40, 4).unwrap();
        let bundle = render_describe_prompt(&walk, &assignment).unwrap();
        assert_eq!(
            bundle.scoring_key,
            ScoringKey::StateSpace {
                description: "4-by-4 grid".to_string()
            }
        );

        let g5 = Topology::grid(5).unwrap();
        let assignment = assign_words(&g5, Wordlist::bundled(), 3).unwrap();
        let walk = generate_walk(&g5, 40, 4).unwrap();
        let bundle = render_describe_prompt(&walk, &assignment).unwrap();
        assert_eq!(
            bundle.scoring_key,
            ScoringKey::StateSpace {
                description: "5-by-5 grid".to_string()
            }
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        let g5 = Topology::grid(5).unwrap();
        let assignment = assign_words(&g5, Wordlist::bundled(), 3).unwrap();
        let walk = generate_walk(&g5, 60, 4).unwrap();
        let a = render_awm_prompt(&walk, &assignment, Rule::OneStep, 10, 5).unwrap();
        let b = render_awm_prompt(&walk, &assignment, Rule::OneStep, 10, 5).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn regeneration_reproduces_bundles_byte_for_byte() {
        let wordlist = Wordlist::bundled();
        let g5 = Topology::grid(5).unwrap();
        let l16 = Topology::line(16).unwrap();
        let g5_words = assign_words(&g5, wordlist, 31).unwrap();
        let l16_words = assign_words(&l16, wordlist, 32).unwrap();
        let g5_walk = generate_walk(&g5, 80, 33).unwrap();
        let l16_pairs = generate_adjacency_pairs(&l16, 40, 34).unwrap();

        let bundles = vec![
            render_ntp_prompt(&g5_walk, &g5_words, Condition::InstructionNtp).unwrap(),
            render_ntp_prompt(&l16_pairs, &l16_words, Condition::PrefilledNtp).unwrap(),
            render_awm_prompt(&g5_walk, &g5_words, Rule::TwoStep, 10, 35).unwrap(),
            render_hints(
                &render_awm_prompt(&g5_walk, &g5_words, Rule::ThreeStep, 10, 36).unwrap(),
                &g5,
                Rule::ThreeStep,
            )
            .unwrap(),
            render_explicit_prompt(&g5, &g5_words, Rule::OneStep, 10, 37).unwrap(),
            render_metalearning_prompt(&g5, &g5_words, Rule::TwoStep, 38).unwrap(),
            render_describe_prompt(&g5_walk, &g5_words).unwrap(),
        ];
        for bundle in bundles {
            let rebuilt = regenerate(bundle.condition, &bundle.provenance, wordlist).unwrap();
            assert_eq!(
                serde_json::to_string(&rebuilt).unwrap(),
                serde_json::to_string(&bundle).unwrap(),
                "condition {:?}",
                bundle.condition
            );
        }
    }
}
