//! Seeded random walks over grids and adjacency-pair streams over lines.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::topology::{adjacency, State, Topology, TopologyKind};

use super::TaskGenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    RandomWalk,
    AdjacencyPairs,
}

/// A generated state sequence: either one connected random walk or a stream
/// of independently drawn adjacent pairs laid out as `(2k, 2k+1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkSequence {
    pub kind: WalkKind,
    pub topology: Topology,
    pub states: Vec<State>,
    pub seed: u64,
}

impl WalkSequence {
    /// Context length in the units used throughout: words for random walks,
    /// pairs for adjacency streams.
    pub fn context_length(&self) -> usize {
        match self.kind {
            WalkKind::RandomWalk => self.states.len(),
            WalkKind::AdjacencyPairs => self.states.len() / 2,
        }
    }

    /// The state sequence as rendered for next-word prediction. Pair streams
    /// are cut mid-pair so the next word is always constrained by adjacency.
    pub fn ntp_surface(&self) -> &[State] {
        match self.kind {
            WalkKind::RandomWalk => &self.states,
            WalkKind::AdjacencyPairs => &self.states[..self.states.len() - 1],
        }
    }
}

/// Generate a random walk over a grid: uniform start state, then uniform
/// steps over the current state's neighbors.
pub fn generate_walk(
    topology: &Topology,
    length: usize,
    seed: u64,
) -> Result<WalkSequence, TaskGenError> {
    if topology.kind != TopologyKind::Grid {
        return Err(TaskGenError::WalkNeedsGrid);
    }
    if length == 0 {
        return Err(TaskGenError::EmptyWalk);
    }
    let adj = adjacency(topology);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(length);
    let mut current: State = rng.random_range(0..topology.state_count());
    states.push(current);
    for _ in 1..length {
        let neighbors = adj.neighbors(current);
        current = neighbors[rng.random_range(0..neighbors.len())];
        states.push(current);
    }
    Ok(WalkSequence {
        kind: WalkKind::RandomWalk,
        topology: *topology,
        states,
        seed,
    })
}

/// Generate a stream of adjacent-state pairs over a line, each pair drawn
/// uniformly from the `2(N-1)` ordered adjacent pairs.
pub fn generate_adjacency_pairs(
    topology: &Topology,
    pair_count: usize,
    seed: u64,
) -> Result<WalkSequence, TaskGenError> {
    if topology.kind != TopologyKind::Line {
        return Err(TaskGenError::PairsNeedLine);
    }
    if pair_count == 0 {
        return Err(TaskGenError::EmptyWalk);
    }
    let adj = adjacency(topology);
    let pairs = adj.ordered_pairs();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(pair_count * 2);
    for _ in 0..pair_count {
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        states.push(a);
        states.push(b);
    }
    Ok(WalkSequence {
        kind: WalkKind::AdjacencyPairs,
        topology: *topology,
        states,
        seed,
    })
}
