//! Task generation: seeded walks and pair streams, word assignments, and
//! every prompt condition rendered as a role-tagged conversation with its
//! scoring key.
//!
//! Everything here is a pure function of `(topology, seeds, config)`:
//! rendering the same inputs twice yields byte-identical bundles, and a
//! bundle's scoring key can always be regenerated from its provenance alone.

mod context;
mod prompt;
mod templates;
mod walk;
mod words;

pub use context::{canonical_context_length, PromptFormat, CONSTANT_LONG_CONTEXT};
pub use prompt::{
    default_n_shots, regenerate, render_awm_prompt, render_awm_prompt_with_style,
    render_describe_prompt, render_explicit_prompt, render_hints, render_metalearning_prompt,
    render_ntp_prompt, Condition, Message, PromptBundle, PromptStyle, Provenance, Role,
    ScoringKey, Seeds, METALEARNING_SHOTS_PER_BLOCK, METALEARNING_WALK_LEN,
};
pub use templates::{render_template, AUTORATER_USER};
pub use walk::{generate_adjacency_pairs, generate_walk, WalkKind, WalkSequence};
pub use words::{assign_words, WordAssignment, Wordlist};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskGenError {
    #[error("random walks are generated over grids; use generate_adjacency_pairs for lines")]
    WalkNeedsGrid,
    #[error("adjacency-pair streams are generated over lines; use generate_walk for grids")]
    PairsNeedLine,
    #[error("walk length must be at least 1")]
    EmptyWalk,
    #[error("wordlist has {available} words but the topology needs {needed}")]
    InsufficientVocabulary { available: usize, needed: usize },
    #[error("wordlist contains duplicate or empty words")]
    MalformedWordlist,
    #[error("{needed} distinct rule inputs requested but the rule domain has only {domain}")]
    InsufficientExamples { needed: usize, domain: usize },
    #[error("condition {0:?} requires a grid topology")]
    NeedsGrid(Condition),
    #[error("bundle condition {0:?} is not in the world-modeling family")]
    NotAwmFamily(Condition),
    #[error("no bundled context length for ({model}, {prompt}, {topology}); pass an explicit override")]
    MissingContextLength {
        model: String,
        prompt: &'static str,
        topology: String,
    },
    #[error("walk uses {walk} states but the word assignment covers {assignment}")]
    AssignmentMismatch { walk: usize, assignment: usize },
    #[error("provenance references wordlist '{expected}' but '{actual}' was supplied")]
    WordlistMismatch { expected: String, actual: String },
    #[error("condition {0:?} cannot be regenerated from provenance alone")]
    NotRegenerable(Condition),
    #[error(transparent)]
    Topology(#[from] crate::topology::TopologyError),
    #[error("failed to read wordlist: {0}")]
    Io(#[from] std::io::Error),
}
