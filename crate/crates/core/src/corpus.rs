//! Parallel corpora, tag inventories, tagged sentences and vocabularies.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

pub type Sentence = Vec<String>;

/// Language side of a (multi-)parallel corpus. Side 0 is the annotated
/// source language; every other side is a target language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Side(pub u8);

impl Side {
    pub const SOURCE: Side = Side(0);
    pub const TARGET: Side = Side(1);
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("source"),
            1 => f.write_str("target"),
            n => write!(f, "target{}", n),
        }
    }
}

/// Sentence-aligned corpus with two or more sides. Sentence `i` of every
/// side together forms bi-sentence `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    sides: Vec<Vec<Sentence>>,
}

impl ParallelCorpus {
    pub fn new(source: Vec<Sentence>, target: Vec<Sentence>) -> Result<Self> {
        Self::multi(alloc::vec![source, target])
    }

    /// Builds an N-way parallel corpus; side `k` of the result is `sides[k]`.
    pub fn multi(sides: Vec<Vec<Sentence>>) -> Result<Self> {
        if sides.len() < 2 {
            return Err(Error::Consistency(
                "a parallel corpus needs at least two sides".to_string(),
            ));
        }
        if sides.len() > u8::MAX as usize + 1 {
            return Err(Error::Consistency("too many sides".to_string()));
        }
        let n = sides[0].len();
        for side in &sides[1..] {
            if side.len() != n {
                return Err(Error::Alignment {
                    source_lines: n,
                    target_lines: side.len(),
                });
            }
        }
        for (s, side) in sides.iter().enumerate() {
            if let Some(i) = side.iter().position(|sentence| sentence.is_empty()) {
                return Err(Error::MalformedCorpus {
                    side: s as u8,
                    line: i + 1,
                });
            }
        }
        Ok(ParallelCorpus { sides })
    }

    /// Number of bi-sentences.
    pub fn n_pairs(&self) -> usize {
        self.sides[0].len()
    }

    pub fn n_sides(&self) -> usize {
        self.sides.len()
    }

    pub fn side(&self, side: Side) -> &[Sentence] {
        &self.sides[side.0 as usize]
    }

    pub fn source(&self) -> &[Sentence] {
        self.side(Side::SOURCE)
    }

    pub fn target(&self) -> &[Sentence] {
        self.side(Side::TARGET)
    }

    pub fn pair(&self, i: usize) -> (&[String], &[String]) {
        (&self.sides[0][i], &self.sides[1][i])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[String], &[String])> + '_ {
        (0..self.n_pairs()).map(move |i| self.pair(i))
    }

    pub fn sides(&self) -> impl Iterator<Item = (Side, &[Sentence])> + '_ {
        self.sides
            .iter()
            .enumerate()
            .map(|(i, s)| (Side(i as u8), s.as_slice()))
    }
}

/// The 12-label universal part-of-speech inventory.
pub const UNIVERSAL_TAGS: [&str; 12] = [
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", ".", "X",
];

/// Ordered tag inventory; a label's position is its index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    name: String,
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TagSet {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::TagSet("tagset has no labels".to_string()));
        }
        let mut index = BTreeMap::new();
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(Error::TagSet(alloc::format!("invalid label {:?}", label)));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::TagSet(alloc::format!("duplicate label `{}`", label)));
            }
        }
        Ok(TagSet {
            name: name.into(),
            labels,
            index,
        })
    }

    pub fn universal() -> Self {
        Self::new(
            "universal",
            UNIVERSAL_TAGS.iter().map(|s| s.to_string()).collect(),
        )
        .expect("universal tagset is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    /// Same labels in the same order (names may differ).
    pub fn same_labels(&self, other: &TagSet) -> bool {
        self.labels == other.labels
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<usize>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<usize>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Consistency(alloc::format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        Ok(TaggedSentence { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A sentence where some tokens may carry no tag (the unknown marker of a
/// projected corpus).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialTaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<Option<usize>>,
}

impl From<&TaggedSentence> for PartialTaggedSentence {
    fn from(s: &TaggedSentence) -> Self {
        PartialTaggedSentence {
            tokens: s.tokens.clone(),
            tags: s.tags.iter().map(|&t| Some(t)).collect(),
        }
    }
}

/// Word ↔ id map for one side of a corpus, ids in order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    side: Side,
    words: Vec<String>,
    ids: BTreeMap<String, u32>,
    freq: Vec<u64>,
}

impl Vocabulary {
    pub fn from_sentences<'a>(side: Side, sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let mut vocab = Vocabulary {
            side,
            words: Vec::new(),
            ids: BTreeMap::new(),
            freq: Vec::new(),
        };
        for sentence in sentences {
            for token in sentence {
                vocab.add(token);
            }
        }
        vocab
    }

    fn add(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            self.freq[id as usize] += 1;
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        self.freq.push(1);
        id
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn frequency(&self, word: &str) -> u64 {
        self.id(word).map_or(0, |id| self.freq[id as usize])
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

pub fn build_vocabulary(corpus: &ParallelCorpus, side: Side) -> Vocabulary {
    Vocabulary::from_sentences(side, corpus.side(side))
}
