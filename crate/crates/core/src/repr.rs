//! Alignment-free common word representation.
//!
//! A word `w` on side `s` is the binary vector over the `N` bi-sentences of a
//! parallel corpus with a one at position `i` iff `w` occurs in sentence `i`
//! of side `s`. Translations tend to occur in the same bi-sentences, so their
//! vectors overlap. Vectors are stored as sorted index sets.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{ParallelCorpus, Side};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonWordVector {
    indices: Vec<u32>,
    dim: usize,
}

impl CommonWordVector {
    /// Builds a vector from an index list, sorting and deduplicating it.
    pub fn new(mut indices: Vec<u32>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::Shape(alloc::format!(
                    "index {} out of range for dimension {}",
                    last,
                    dim
                )));
            }
        }
        Ok(CommonWordVector { indices, dim })
    }

    pub fn zeros(dim: usize) -> Self {
        CommonWordVector {
            indices: Vec::new(),
            dim,
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True for the all-zero vector of an out-of-vocabulary word.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.dim];
        for &i in &self.indices {
            v[i as usize] = 1.0;
        }
        v
    }
}

/// Common vectors for every (side, word) of a parallel corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReprTable {
    dim: usize,
    entries: BTreeMap<Side, BTreeMap<String, CommonWordVector>>,
    zero: CommonWordVector,
}

impl ReprTable {
    pub fn new(dim: usize) -> Self {
        ReprTable {
            dim,
            entries: BTreeMap::new(),
            zero: CommonWordVector::zeros(dim),
        }
    }

    pub fn insert(&mut self, side: Side, word: String, vector: CommonWordVector) -> Result<()> {
        if vector.dim != self.dim {
            return Err(Error::Shape(alloc::format!(
                "vector of dimension {} in a table of dimension {}",
                vector.dim,
                self.dim
            )));
        }
        self.entries.entry(side).or_default().insert(word, vector);
        Ok(())
    }

    /// Number of bi-sentences `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, side: Side, word: &str) -> Option<&CommonWordVector> {
        self.entries.get(&side)?.get(word)
    }

    /// The word's vector, or the zero vector when the word is unknown.
    pub fn vector(&self, side: Side, word: &str) -> &CommonWordVector {
        self.get(side, word).unwrap_or(&self.zero)
    }

    pub fn is_known(&self, side: Side, word: &str) -> bool {
        self.get(side, word).is_some_and(|v| !v.is_empty())
    }

    /// Entries in (side, word) order.
    pub fn iter(&self) -> impl Iterator<Item = (Side, &str, &CommonWordVector)> {
        self.entries.iter().flat_map(|(side, words)| {
            words.iter().map(move |(word, v)| (*side, word.as_str(), v))
        })
    }

    pub fn words(&self, side: Side) -> impl Iterator<Item = &str> {
        self.entries
            .get(&side)
            .into_iter()
            .flat_map(|words| words.keys().map(String::as_str))
    }
}

/// Builds the common representation of every word on every side.
pub fn build_representation(corpus: &ParallelCorpus) -> ReprTable {
    let n = corpus.n_pairs();
    let mut occurrences: BTreeMap<(Side, &str), Vec<u32>> = BTreeMap::new();
    for (side, sentences) in corpus.sides() {
        for (i, sentence) in sentences.iter().enumerate() {
            for token in sentence {
                let list = occurrences.entry((side, token.as_str())).or_default();
                // Sentences are visited in order, so duplicates are adjacent.
                if list.last() != Some(&(i as u32)) {
                    list.push(i as u32);
                }
            }
        }
    }
    let mut table = ReprTable::new(n);
    for ((side, word), indices) in occurrences {
        table
            .entries
            .entry(side)
            .or_default()
            .insert(word.to_string(), CommonWordVector { indices, dim: n });
    }
    table
}
