//! Synthetic dump builders for tests, examples, and calibration.
//!
//! These construct dumps whose geometry is known in closed form, so metric
//! behavior can be checked without a real inference stack.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::topology::{State, Topology};

use super::dump::EmbeddingDump;
use super::GeometryError;

/// Per-state vectors equal to the state's coordinates, zero-padded to
/// `hidden_dim`.
pub fn coordinate_vectors(topology: &Topology, hidden_dim: usize) -> Vec<Vec<f32>> {
    assert!(hidden_dim >= 2, "coordinate embedding needs 2+ dims");
    (0..topology.state_count())
        .map(|s| {
            let (i, j) = topology.coords(s);
            let mut v = vec![0.0f32; hidden_dim];
            v[0] = i as f32;
            v[1] = j as f32;
            v
        })
        .collect()
}

/// Per-state vectors drawn uniformly from `[-1, 1]^hidden_dim`.
pub fn random_vectors(state_count: usize, hidden_dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..state_count)
        .map(|_| {
            (0..hidden_dim)
                .map(|_| rng.random::<f32>() * 2.0 - 1.0)
                .collect()
        })
        .collect()
}

/// A one-layer dump where every occurrence of a state carries the same
/// fixed vector.
pub fn state_vector_dump(
    topology: &Topology,
    states: &[State],
    vectors: &[Vec<f32>],
    layer_id: u32,
    walk_ref: &str,
) -> Result<EmbeddingDump, GeometryError> {
    assert_eq!(vectors.len(), topology.state_count());
    let hidden_dim = vectors[0].len();
    let mut data = Vec::with_capacity(states.len() * hidden_dim);
    for &s in states {
        data.extend_from_slice(&vectors[s]);
    }
    let mut layers = BTreeMap::new();
    layers.insert(layer_id, data);
    let alignment = states.iter().map(|&s| s as i32).collect();
    EmbeddingDump::from_parts(walk_ref, hidden_dim, layers, alignment)
}

/// A one-layer dump that linearly interpolates each token's vector from a
/// random per-state embedding toward the coordinate embedding as the
/// sequence advances: position `t` of `T` sits at fraction `t / (T - 1)`.
///
/// Running the metric curve over it shows the canonical learning shape:
/// distance correlation rising toward 1 while Dirichlet energy falls.
pub fn interpolated_dump(
    topology: &Topology,
    states: &[State],
    hidden_dim: usize,
    layer_id: u32,
    seed: u64,
) -> Result<EmbeddingDump, GeometryError> {
    let start = random_vectors(topology.state_count(), hidden_dim, seed);
    let target = coordinate_vectors(topology, hidden_dim);
    let len = states.len();
    let mut data = Vec::with_capacity(len * hidden_dim);
    for (pos, &s) in states.iter().enumerate() {
        let alpha = if len > 1 {
            pos as f32 / (len - 1) as f32
        } else {
            1.0
        };
        for d in 0..hidden_dim {
            data.push((1.0 - alpha) * start[s][d] + alpha * target[s][d]);
        }
    }
    let mut layers = BTreeMap::new();
    layers.insert(layer_id, data);
    let alignment = states.iter().map(|&s| s as i32).collect();
    EmbeddingDump::from_parts(format!("interpolated-{seed}"), hidden_dim, layers, alignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_endpoints() {
        let topo = Topology::grid(2).unwrap();
        let states = vec![0usize, 1, 3, 2];
        let dump = interpolated_dump(&topo, &states, 4, 0, 3).unwrap();
        let start = random_vectors(4, 4, 3);
        let target = coordinate_vectors(&topo, 4);
        assert_eq!(dump.token_vector(0, 0).unwrap(), start[0].as_slice());
        assert_eq!(dump.token_vector(0, 3).unwrap(), target[2].as_slice());
    }

    #[test]
    fn random_vectors_are_seeded() {
        assert_eq!(random_vectors(3, 5, 1), random_vectors(3, 5, 1));
        assert_ne!(random_vectors(3, 5, 1), random_vectors(3, 5, 2));
    }
}
