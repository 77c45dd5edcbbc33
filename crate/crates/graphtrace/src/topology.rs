//! Latent state spaces: grid and line topologies, adjacency, Manhattan
//! distances, and the positional rules used by the world-modeling task.
//!
//! States are indexed row-major from coordinate (0, 0). Lines are treated as
//! single-column grids, so every coordinate is an `(i, j)` pair with `j = 0`
//! for lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a state in a topology, `0..state_count()`.
pub type State = usize;

/// Integer coordinates of a state: `(row, column)` for grids, `(position, 0)`
/// for lines.
pub type Coord = (i64, i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("invalid size {0}: a topology needs at least 2 states per dimension")]
    InvalidSize(usize),
    #[error("rule {rule:?} is not applicable to {kind:?} topologies")]
    RuleNotApplicable { rule: Rule, kind: TopologyKind },
    #[error("state index {0} out of range (state count {1})")]
    StateOutOfRange(State, usize),
}

/// Shape of the latent state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Grid,
    Line,
}

/// A connected lattice of states with unique integer coordinates.
///
/// The canonical instances are 4-by-4 and 5-by-5 grids and 16- and 25-state
/// lines; other sizes are permitted (mainly so tests can use tiny instances)
/// and reported as non-canonical by [`Topology::is_canonical`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    /// Side length for grids, total length for lines.
    pub size: usize,
}

impl Topology {
    /// Build a topology of the given kind and size.
    pub fn new(kind: TopologyKind, size: usize) -> Result<Self, TopologyError> {
        if size < 2 {
            return Err(TopologyError::InvalidSize(size));
        }
        Ok(Topology { kind, size })
    }

    pub fn grid(side: usize) -> Result<Self, TopologyError> {
        Self::new(TopologyKind::Grid, side)
    }

    pub fn line(length: usize) -> Result<Self, TopologyError> {
        Self::new(TopologyKind::Line, length)
    }

    /// Total number of states: side squared for grids, length for lines.
    pub fn state_count(&self) -> usize {
        match self.kind {
            TopologyKind::Grid => self.size * self.size,
            TopologyKind::Line => self.size,
        }
    }

    /// Whether this is one of the canonical study sizes
    /// (grids of side 4 or 5, lines of length 16 or 25).
    pub fn is_canonical(&self) -> bool {
        match self.kind {
            TopologyKind::Grid => self.size == 4 || self.size == 5,
            TopologyKind::Line => self.size == 16 || self.size == 25,
        }
    }

    /// Coordinates of a state under row-major indexing.
    pub fn coords(&self, state: State) -> Coord {
        debug_assert!(state < self.state_count());
        match self.kind {
            TopologyKind::Grid => ((state / self.size) as i64, (state % self.size) as i64),
            TopologyKind::Line => (state as i64, 0),
        }
    }

    /// Inverse of [`Topology::coords`]; `None` if the coordinates are out of
    /// bounds.
    pub fn state_at(&self, coord: Coord) -> Option<State> {
        let (i, j) = coord;
        if i < 0 || j < 0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        match self.kind {
            TopologyKind::Grid if i < self.size && j < self.size => Some(i * self.size + j),
            TopologyKind::Line if i < self.size && j == 0 => Some(i),
            _ => None,
        }
    }

    /// L1 distance between the coordinates of two states.
    pub fn manhattan(&self, a: State, b: State) -> u64 {
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        (ai - bi).unsigned_abs() + (aj - bj).unsigned_abs()
    }

    /// States adjacent to `state` (Manhattan distance 1), ascending.
    pub fn neighbors(&self, state: State) -> Vec<State> {
        let (i, j) = self.coords(state);
        let mut out: Vec<State> = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            .iter()
            .filter_map(|&c| self.state_at(c))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, state: State) -> usize {
        self.neighbors(state).len()
    }

    /// Human-readable label used by prompts and the autorater, e.g.
    /// "4-by-4 grid" or "16-state line".
    pub fn label(&self) -> String {
        match self.kind {
            TopologyKind::Grid => format!("{}-by-{} grid", self.size, self.size),
            TopologyKind::Line => format!("{}-state line", self.size),
        }
    }
}

/// All ordered state pairs at Manhattan distance 1.
///
/// Symmetric and irreflexive by construction: `(a, b)` is present iff
/// `(b, a)` is, and no `(a, a)` pair exists.
#[derive(Debug, Clone)]
pub struct AdjacencySet {
    pairs: Vec<(State, State)>,
    neighbors: Vec<Vec<State>>,
}

impl AdjacencySet {
    /// Ordered pairs in lexicographic order.
    pub fn ordered_pairs(&self) -> &[(State, State)] {
        &self.pairs
    }

    pub fn contains(&self, a: State, b: State) -> bool {
        self.neighbors
            .get(a)
            .map(|ns| ns.binary_search(&b).is_ok())
            .unwrap_or(false)
    }

    pub fn neighbors(&self, state: State) -> &[State] {
        &self.neighbors[state]
    }

    pub fn degree(&self, state: State) -> usize {
        self.neighbors[state].len()
    }

    pub fn state_count(&self) -> usize {
        self.neighbors.len()
    }
}

/// Enumerate the adjacency structure of a topology.
pub fn adjacency(topology: &Topology) -> AdjacencySet {
    let n = topology.state_count();
    let neighbors: Vec<Vec<State>> = (0..n).map(|s| topology.neighbors(s)).collect();
    let mut pairs = Vec::new();
    for (a, ns) in neighbors.iter().enumerate() {
        for &b in ns {
            pairs.push((a, b));
        }
    }
    AdjacencySet { pairs, neighbors }
}

/// A positional mapping rule for the world-modeling task.
///
/// Offsets are in `(row, column)` coordinates, with "down" meaning an
/// increasing row index. `ThreeStep` is defined only on grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    OneStep,
    TwoStep,
    ThreeStep,
}

impl Rule {
    pub fn offset(&self) -> Coord {
        match self {
            Rule::OneStep => (1, 0),
            Rule::TwoStep => (2, 0),
            Rule::ThreeStep => (2, 1),
        }
    }

    pub fn applicable_to(&self, kind: TopologyKind) -> bool {
        match self {
            Rule::ThreeStep => kind == TopologyKind::Grid,
            _ => true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Rule::OneStep => "one_step",
            Rule::TwoStep => "two_step",
            Rule::ThreeStep => "three_step",
        }
    }
}

/// Apply a rule to a state. `Ok(None)` means the offset lands out of bounds
/// and the state is not a valid rule input.
pub fn apply_rule(
    topology: &Topology,
    rule: Rule,
    state: State,
) -> Result<Option<State>, TopologyError> {
    if !rule.applicable_to(topology.kind) {
        return Err(TopologyError::RuleNotApplicable {
            rule,
            kind: topology.kind,
        });
    }
    if state >= topology.state_count() {
        return Err(TopologyError::StateOutOfRange(state, topology.state_count()));
    }
    let (i, j) = topology.coords(state);
    let (di, dj) = rule.offset();
    Ok(topology.state_at((i + di, j + dj)))
}

/// The states on which `apply_rule` is defined, in ascending index order.
pub fn rule_domain(topology: &Topology, rule: Rule) -> Result<Vec<State>, TopologyError> {
    let mut domain = Vec::new();
    for s in 0..topology.state_count() {
        if apply_rule(topology, rule, s)?.is_some() {
            domain.push(s);
        }
    }
    Ok(domain)
}
