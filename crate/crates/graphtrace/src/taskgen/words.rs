//! Word lists and seeded state-to-word assignments.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::topology::{State, Topology};

use super::TaskGenError;

const BUNDLED_WORDLIST: &str = include_str!("../../data/wordlist.txt");
const BUNDLED_WORDLIST_ID: &str = "common-nouns-v1";

/// A named pool of candidate state labels.
///
/// Words must be unique and non-empty. The bundled list holds common English
/// nouns; whether a word is a single token for a given model depends on that
/// model's tokenizer, so callers with tokenizer access can supply their own
/// filtered list via [`Wordlist::from_file`].
#[derive(Debug, Clone)]
pub struct Wordlist {
    pub id: String,
    words: Vec<String>,
}

impl Wordlist {
    pub fn new(id: impl Into<String>, words: Vec<String>) -> Result<Self, TaskGenError> {
        let unique: BTreeSet<&str> = words.iter().map(|w| w.as_str()).collect();
        if unique.len() != words.len() || words.iter().any(|w| w.trim().is_empty()) {
            return Err(TaskGenError::MalformedWordlist);
        }
        Ok(Wordlist {
            id: id.into(),
            words,
        })
    }

    /// The word list shipped with the crate.
    pub fn bundled() -> &'static Wordlist {
        static BUNDLED: OnceLock<Wordlist> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            let words = BUNDLED_WORDLIST
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            Wordlist::new(BUNDLED_WORDLIST_ID, words).expect("bundled wordlist is well-formed")
        })
    }

    /// Load a wordlist from a plain-text file, one word per line. The file
    /// stem becomes the wordlist id.
    pub fn from_file(path: &Path) -> Result<Self, TaskGenError> {
        let text = std::fs::read_to_string(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        let words = text
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        Wordlist::new(id, words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// A bijection from states to words, drawn uniformly from a wordlist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordAssignment {
    words: Vec<String>,
    pub seed: u64,
    pub wordlist_id: String,
}

impl WordAssignment {
    pub fn word(&self, state: State) -> &str {
        &self.words[state]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn state_count(&self) -> usize {
        self.words.len()
    }

    pub fn state_of(&self, word: &str) -> Option<State> {
        self.words.iter().position(|w| w == word)
    }

    /// The full vocabulary of this assignment, sorted.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.words.iter().cloned().collect()
    }
}

/// Draw a uniform random injection from states into the wordlist.
pub fn assign_words(
    topology: &Topology,
    wordlist: &Wordlist,
    seed: u64,
) -> Result<WordAssignment, TaskGenError> {
    let needed = topology.state_count();
    if wordlist.len() < needed {
        return Err(TaskGenError::InsufficientVocabulary {
            available: wordlist.len(),
            needed,
        });
    }
    // partial Fisher-Yates: the first `needed` slots are a uniform draw
    // without replacement, in uniform order
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..wordlist.len()).collect();
    for k in 0..needed {
        let pick = rng.random_range(k..indices.len());
        indices.swap(k, pick);
    }
    let words = indices[..needed]
        .iter()
        .map(|&i| wordlist.words()[i].clone())
        .collect();
    Ok(WordAssignment {
        words,
        seed,
        wordlist_id: wordlist.id.clone(),
    })
}
