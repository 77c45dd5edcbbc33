//! Bundled optimal context lengths per (model, prompt format, topology).

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::topology::{Topology, TopologyKind};

use super::TaskGenError;

const TABLE: &str = include_str!("../../data/context_lengths.tsv");

/// Context length used by the constant-long mode, in walk words for grids
/// and adjacent pairs for lines.
pub const CONSTANT_LONG_CONTEXT: usize = 1500;

/// Whether the walk is delivered in a prefilled response or a user message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptFormat {
    Prefill,
    Instruction,
}

impl PromptFormat {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "prefill" => Some(PromptFormat::Prefill),
            "instruction" => Some(PromptFormat::Instruction),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PromptFormat::Prefill => "prefill",
            PromptFormat::Instruction => "instruction",
        }
    }
}

fn topology_key(topology: &Topology) -> String {
    let kind = match topology.kind {
        TopologyKind::Grid => "grid",
        TopologyKind::Line => "line",
    };
    format!("{kind}{}", topology.state_count())
}

fn table() -> &'static HashMap<(String, PromptFormat, String), usize> {
    static PARSED: OnceLock<HashMap<(String, PromptFormat, String), usize>> = OnceLock::new();
    PARSED.get_or_init(|| {
        let mut map = HashMap::new();
        for line in TABLE.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let model = cols.next().expect("model column");
            let prompt = PromptFormat::parse(cols.next().expect("prompt column"))
                .expect("known prompt format");
            let topo = cols.next().expect("topology column");
            let len: usize = cols
                .next()
                .expect("length column")
                .parse()
                .expect("numeric length");
            map.insert((model.to_string(), prompt, topo.to_string()), len);
        }
        map
    })
}

/// Look up the bundled optimal context length for a model, prompt format,
/// and topology. Model ids match case-insensitively. The value is in walk
/// words for grids and adjacent pairs for lines.
pub fn canonical_context_length(
    model_id: &str,
    format: PromptFormat,
    topology: &Topology,
) -> Result<usize, TaskGenError> {
    let key = (
        model_id.to_ascii_lowercase(),
        format,
        topology_key(topology),
    );
    table()
        .get(&key)
        .copied()
        .ok_or_else(|| TaskGenError::MissingContextLength {
            model: model_id.to_string(),
            prompt: format.name(),
            topology: topology_key(topology),
        })
}
