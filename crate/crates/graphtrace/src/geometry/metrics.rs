//! Dirichlet Energy and Distance Correlation over windowed mean
//! representations.
//!
//! Sums accumulate in f64 over the dump's f32 values so the brute-force
//! oracle tolerance of 1e-9 stays meaningful. Both metrics restrict to the
//! states actually present in a window; windows with too few present states
//! are degenerate, flagged rather than silently zeroed.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::topology::{AdjacencySet, State, Topology};

use super::dump::EmbeddingDump;
use super::GeometryError;

/// Default sliding-window width, in tokens.
pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowInfo {
    pub end_position: usize,
    pub width: usize,
    /// True when the window was truncated at the start of the dump
    /// (warm-up: `end_position < width`).
    pub partial: bool,
}

/// Per-state mean hidden vectors over one window of one layer.
///
/// A state has a vector iff it occurs at least once in the window.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRepresentation {
    pub layer_id: u32,
    pub window: WindowInfo,
    vectors: BTreeMap<State, Vec<f64>>,
}

impl MeanRepresentation {
    /// Wrap precomputed per-state vectors; mainly for fixtures and tests.
    pub fn from_vectors(layer_id: u32, vectors: BTreeMap<State, Vec<f64>>) -> Self {
        MeanRepresentation {
            layer_id,
            window: WindowInfo {
                end_position: 0,
                width: 0,
                partial: false,
            },
            vectors,
        }
    }

    pub fn present_states(&self) -> impl Iterator<Item = State> + '_ {
        self.vectors.keys().copied()
    }

    pub fn present_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, state: State) -> Option<&[f64]> {
        self.vectors.get(&state).map(|v| v.as_slice())
    }

    pub fn vectors(&self) -> &BTreeMap<State, Vec<f64>> {
        &self.vectors
    }

    /// Keep only the given states.
    fn restricted_to(&self, states: &[State]) -> Self {
        let vectors = self
            .vectors
            .iter()
            .filter(|(s, _)| states.contains(s))
            .map(|(s, v)| (*s, v.clone()))
            .collect();
        MeanRepresentation {
            layer_id: self.layer_id,
            window: self.window,
            vectors,
        }
    }
}

/// Mean vector per state over an arbitrary set of token positions.
fn means_over_positions(
    dump: &EmbeddingDump,
    layer_id: u32,
    positions: impl Iterator<Item = usize>,
) -> Result<BTreeMap<State, Vec<f64>>, GeometryError> {
    let dim = dump.manifest.hidden_dim;
    let mut sums: BTreeMap<State, (Vec<f64>, u64)> = BTreeMap::new();
    for pos in positions {
        let Some(state) = dump.state_at(pos) else {
            continue;
        };
        let vector = dump.token_vector(layer_id, pos)?;
        let entry = sums.entry(state).or_insert_with(|| (vec![0.0; dim], 0));
        for (acc, &v) in entry.0.iter_mut().zip(vector) {
            *acc += v as f64;
        }
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(state, (mut sum, count))| {
            for v in &mut sum {
                *v /= count as f64;
            }
            (state, sum)
        })
        .collect())
}

/// Mean representation over the window `[end_position - width, end_position)`.
///
/// Warm-up windows (`end_position < width`) are computed over the truncated
/// prefix and flagged partial.
pub fn window_means(
    dump: &EmbeddingDump,
    layer_id: u32,
    end_position: usize,
    width: usize,
) -> Result<MeanRepresentation, GeometryError> {
    if width == 0 {
        return Err(GeometryError::EmptyWindow);
    }
    if end_position > dump.token_count() || end_position == 0 {
        return Err(GeometryError::WindowOutOfRange {
            end: end_position,
            token_count: dump.token_count(),
        });
    }
    let partial = end_position < width;
    let start = end_position.saturating_sub(width);
    let vectors = means_over_positions(dump, layer_id, start..end_position)?;
    Ok(MeanRepresentation {
        layer_id,
        window: WindowInfo {
            end_position,
            width,
            partial,
        },
        vectors,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_states_in_range(
    meanrep: &MeanRepresentation,
    state_count: usize,
) -> Result<(), GeometryError> {
    if let Some(state) = meanrep.present_states().find(|&s| s >= state_count) {
        return Err(GeometryError::StateOutOfRange { state, state_count });
    }
    Ok(())
}

/// Normalized Dirichlet Energy: the summed squared distance between
/// adjacent present states over the summed squared distance between all
/// present state pairs, both over ordered pairs. Always in `[0, 1]`.
pub fn dirichlet_energy(
    meanrep: &MeanRepresentation,
    adjacency: &AdjacencySet,
) -> Result<f64, GeometryError> {
    check_states_in_range(meanrep, adjacency.state_count())?;
    if meanrep.present_count() < 2 {
        return Err(GeometryError::InsufficientStates {
            needed: 2,
            present: meanrep.present_count(),
        });
    }
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (&i, vi) in meanrep.vectors() {
        for (&j, vj) in meanrep.vectors() {
            if i == j {
                continue;
            }
            let d2 = squared_distance(vi, vj);
            denominator += d2;
            if adjacency.contains(i, j) {
                numerator += d2;
            }
        }
    }
    if denominator == 0.0 {
        return Err(GeometryError::DegenerateConfiguration);
    }
    Ok(numerator / denominator)
}

/// Which correlation to use for distance correlation. The default reading
/// of the metric is Pearson; Spearman is exposed as an option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, GeometryError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(GeometryError::DegenerateConfiguration);
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Average ranks, with ties sharing the mean of their rank span.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = mean_rank;
        }
        i = j + 1;
    }
    out
}

/// Distance Correlation: correlation between Euclidean distances in
/// representation space and Manhattan distances in the state space, over
/// unordered present-state pairs. Always in `[-1, 1]`.
pub fn distance_correlation(
    meanrep: &MeanRepresentation,
    topology: &Topology,
) -> Result<f64, GeometryError> {
    distance_correlation_with(meanrep, topology, CorrelationKind::Pearson)
}

pub fn distance_correlation_with(
    meanrep: &MeanRepresentation,
    topology: &Topology,
    kind: CorrelationKind,
) -> Result<f64, GeometryError> {
    check_states_in_range(meanrep, topology.state_count())?;
    if meanrep.present_count() < 3 {
        return Err(GeometryError::InsufficientStates {
            needed: 3,
            present: meanrep.present_count(),
        });
    }
    let states: Vec<State> = meanrep.present_states().collect();
    let mut rep_distances = Vec::new();
    let mut graph_distances = Vec::new();
    for (a, &i) in states.iter().enumerate() {
        for &j in &states[a + 1..] {
            let vi = meanrep.vector(i).unwrap();
            let vj = meanrep.vector(j).unwrap();
            rep_distances.push(squared_distance(vi, vj).sqrt());
            graph_distances.push(topology.manhattan(i, j) as f64);
        }
    }
    match kind {
        CorrelationKind::Pearson => pearson(&rep_distances, &graph_distances),
        CorrelationKind::Spearman => pearson(&ranks(&rep_distances), &ranks(&graph_distances)),
    }
}

/// One evaluation point of the metric curve. Metrics are `None` when the
/// window was degenerate (too few present states or zero variance).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub context_position: usize,
    pub layer_id: u32,
    pub dirichlet_energy: Option<f64>,
    pub distance_correlation: Option<f64>,
    pub degenerate: bool,
}

/// Metric samples ordered by layer, then strictly increasing position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSeries {
    pub samples: Vec<MetricSample>,
}

impl MetricSeries {
    pub fn layer_samples(&self, layer_id: u32) -> impl Iterator<Item = &MetricSample> {
        self.samples.iter().filter(move |s| s.layer_id == layer_id)
    }
}

fn is_degenerate(err: &GeometryError) -> bool {
    matches!(
        err,
        GeometryError::DegenerateConfiguration | GeometryError::InsufficientStates { .. }
    )
}

/// Evaluate both metrics at end positions `width, width + stride, ...` for
/// each requested layer. Degenerate windows are flagged, not skipped
/// silently; genuine errors (missing layers, out-of-range states) propagate.
pub fn metric_curve(
    dump: &EmbeddingDump,
    topology: &Topology,
    layer_ids: &[u32],
    stride: usize,
    width: usize,
) -> Result<MetricSeries, GeometryError> {
    if stride == 0 {
        return Err(GeometryError::EmptyWindow);
    }
    let adjacency = crate::topology::adjacency(topology);
    let mut samples = Vec::new();
    for &layer_id in layer_ids {
        let mut end = width;
        while end <= dump.token_count() {
            let means = window_means(dump, layer_id, end, width)?;
            let de = match dirichlet_energy(&means, &adjacency) {
                Ok(v) => Some(v),
                Err(e) if is_degenerate(&e) => None,
                Err(e) => return Err(e),
            };
            let dc = match distance_correlation(&means, topology) {
                Ok(v) => Some(v),
                Err(e) if is_degenerate(&e) => None,
                Err(e) => return Err(e),
            };
            samples.push(MetricSample {
                context_position: end,
                layer_id,
                degenerate: de.is_none() || dc.is_none(),
                dirichlet_energy: de,
                distance_correlation: dc,
            });
            end += stride;
        }
    }
    Ok(MetricSeries { samples })
}

/// Relative Dirichlet Energy between walk tokens and few-shot tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeDirichlet {
    /// Normalized DE of walk-window means, restricted to the shared states.
    pub walk_energy: f64,
    /// Normalized DE of few-shot means over the same states.
    pub fewshot_energy: f64,
    /// Normalized DE of each shared state's vector at its first occurrence.
    pub uncontextualized_energy: f64,
    /// `walk_energy / fewshot_energy`; below 1 means the few-shot tokens
    /// encode the topology with lower fidelity than the walk tokens.
    pub ratio: f64,
    /// `uncontextualized_energy / walk_energy`, the no-context reference.
    pub baseline_ratio: f64,
    /// States present in both regions, ascending.
    pub shared_states: Vec<State>,
}

/// Compare how faithfully the same states are encoded inside the walk and
/// inside the few-shot example span.
///
/// Walk means are taken over the last `width` tokens of `walk_region`;
/// few-shot means over every token of `fewshot_region`. Both are restricted
/// to the intersection of their present states, which must contain at least
/// two states and one adjacent pair.
pub fn relative_dirichlet(
    dump: &EmbeddingDump,
    adjacency: &AdjacencySet,
    walk_region: Range<usize>,
    fewshot_region: Range<usize>,
    layer_id: u32,
    width: usize,
) -> Result<RelativeDirichlet, GeometryError> {
    check_region(dump, &fewshot_region)?;
    let positions: Vec<usize> = fewshot_region.collect();
    relative_dirichlet_with_positions(dump, adjacency, walk_region, &positions, layer_id, width)
}

/// As [`relative_dirichlet`], but with the few-shot token positions given
/// explicitly — for callers that want only shot inputs, or only outputs.
pub fn relative_dirichlet_with_positions(
    dump: &EmbeddingDump,
    adjacency: &AdjacencySet,
    walk_region: Range<usize>,
    fewshot_positions: &[usize],
    layer_id: u32,
    width: usize,
) -> Result<RelativeDirichlet, GeometryError> {
    check_region(dump, &walk_region)?;
    if width == 0 {
        return Err(GeometryError::EmptyWindow);
    }
    if let Some(&bad) = fewshot_positions.iter().find(|&&p| p >= dump.token_count()) {
        return Err(GeometryError::InvalidRegion {
            start: bad,
            end: bad + 1,
            token_count: dump.token_count(),
        });
    }

    let window_start = walk_region.end.saturating_sub(width).max(walk_region.start);
    let walk_means = means_over_positions(dump, layer_id, window_start..walk_region.end)?;
    let fewshot_means = means_over_positions(dump, layer_id, fewshot_positions.iter().copied())?;

    let shared_states: Vec<State> = walk_means
        .keys()
        .filter(|s| fewshot_means.contains_key(s))
        .copied()
        .collect();
    let adjacent_pairs = shared_states
        .iter()
        .flat_map(|&a| shared_states.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| a < b && adjacency.contains(a, b))
        .count();
    if shared_states.len() < 2 || adjacent_pairs == 0 {
        return Err(GeometryError::InsufficientOverlap {
            shared: shared_states.len(),
            adjacent_pairs,
        });
    }

    // uncontextualized: each shared state's vector at its first occurrence
    let mut first_positions = Vec::new();
    for &state in &shared_states {
        let pos = (0..dump.token_count())
            .find(|&p| dump.state_at(p) == Some(state))
            .expect("shared state occurs in the dump");
        first_positions.push(pos);
    }
    let uncontextualized_means = means_over_positions(dump, layer_id, first_positions.into_iter())?;

    let restrict = |map: BTreeMap<State, Vec<f64>>| {
        MeanRepresentation::from_vectors(layer_id, map).restricted_to(&shared_states)
    };
    let walk_energy = dirichlet_energy(&restrict(walk_means), adjacency)?;
    let fewshot_energy = dirichlet_energy(&restrict(fewshot_means), adjacency)?;
    let uncontextualized_energy = dirichlet_energy(&restrict(uncontextualized_means), adjacency)?;

    Ok(RelativeDirichlet {
        walk_energy,
        fewshot_energy,
        uncontextualized_energy,
        ratio: walk_energy / fewshot_energy,
        baseline_ratio: uncontextualized_energy / walk_energy,
        shared_states,
    })
}

fn check_region(dump: &EmbeddingDump, region: &Range<usize>) -> Result<(), GeometryError> {
    if region.start >= region.end || region.end > dump.token_count() {
        return Err(GeometryError::InvalidRegion {
            start: region.start,
            end: region.end,
            token_count: dump.token_count(),
        });
    }
    Ok(())
}
