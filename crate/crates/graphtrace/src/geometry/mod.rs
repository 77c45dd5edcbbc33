//! Representation-geometry metrics over hidden-state dumps.
//!
//! Hidden states are produced elsewhere (any inference stack that can write
//! the documented dump format) and consumed here: per-state mean vectors
//! over sliding windows, normalized Dirichlet Energy, Distance Correlation,
//! metric curves over context, and the relative energy between walk tokens
//! and few-shot tokens.

pub mod dump;
pub mod metrics;
pub mod synthetic;

pub use dump::{DumpManifest, EmbeddingDump};
pub use metrics::{
    dirichlet_energy, distance_correlation, distance_correlation_with, metric_curve,
    relative_dirichlet, relative_dirichlet_with_positions, window_means, CorrelationKind,
    MeanRepresentation, MetricSample, MetricSeries, RelativeDirichlet, WindowInfo,
    DEFAULT_WINDOW,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("corrupt dump: {0}")]
    CorruptDump(String),
    #[error("layer {0} not present in dump")]
    MissingLayer(u32),
    #[error("window end {end} is outside the dump of {token_count} tokens")]
    WindowOutOfRange { end: usize, token_count: usize },
    #[error("window width and stride must be at least 1")]
    EmptyWindow,
    #[error("region {start}..{end} is empty or exceeds token count {token_count}")]
    InvalidRegion {
        start: usize,
        end: usize,
        token_count: usize,
    },
    #[error("metric needs at least {needed} present states, found {present}")]
    InsufficientStates { needed: usize, present: usize },
    #[error("all present representations coincide; metric undefined")]
    DegenerateConfiguration,
    #[error("regions share {shared} states with {adjacent_pairs} adjacent pairs; need 2 states and 1 pair")]
    InsufficientOverlap { shared: usize, adjacent_pairs: usize },
    #[error("alignment references state {state} outside the {state_count}-state topology")]
    StateOutOfRange { state: usize, state_count: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
