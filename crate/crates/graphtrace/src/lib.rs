//! Graph tracing and adaptive world modeling for language models.
//!
//! This crate generates the two tasks, scores responses with exact graph
//! oracles, and quantifies how well hidden representations mirror the latent
//! state space:
//!
//! - [`topology`] — grid and line state spaces, adjacency, Manhattan
//!   distances, and positional rules.
//! - [`taskgen`] — seeded walks and pair streams, word assignments, and
//!   every prompt condition rendered as a role-tagged conversation with its
//!   scoring key.
//! - [`oracle`] — response scoring, analytic naive baselines, and the
//!   autorater prompt.
//! - [`geometry`] — hidden-state dump ingestion and the Dirichlet Energy /
//!   Distance Correlation metrics.
//! - [`harness`] — experiment configs, the endpoint client, resumable
//!   record storage, aggregation, and the CLI.
//!
//! Everything generated is a pure function of seeds and configuration, so
//! any prompt or scoring key can be regenerated byte-for-byte from the
//! provenance stored alongside it. See the `examples/` directory for one
//! runnable walkthrough per capability.

pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod seed;
pub mod taskgen;
pub mod topology;
