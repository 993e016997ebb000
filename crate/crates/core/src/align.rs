//! Projection baseline: IBM Model 1 word alignment and tag projection.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{build_vocabulary, ParallelCorpus, PartialTaggedSentence, Side, TaggedSentence, Vocabulary};
use crate::math::ln;
use crate::{Error, Result};

/// Source id reserved for the empty word.
const NULL: u32 = 0;

/// Lexical translation probabilities `t(target | source)`, including the
/// empty (NULL) source word.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTable {
    source: Vocabulary,
    target: Vocabulary,
    /// Keyed by (source id + 1, or 0 for NULL; target id).
    probs: BTreeMap<(u32, u32), f64>,
    /// Value of pairs absent from `probs`: uniform before the first EM
    /// step, zero afterwards.
    default: f64,
    iterations: usize,
}

impl TranslationTable {
    /// Uniform `t(e|f) = 1 / |target vocabulary|`.
    pub fn uniform(corpus: &ParallelCorpus) -> Self {
        let source = build_vocabulary(corpus, Side::SOURCE);
        let target = build_vocabulary(corpus, Side::TARGET);
        let default = 1.0 / target.len() as f64;
        TranslationTable {
            source,
            target,
            probs: BTreeMap::new(),
            default,
            iterations: 0,
        }
    }

    pub fn source_vocabulary(&self) -> &Vocabulary {
        &self.source
    }

    pub fn target_vocabulary(&self) -> &Vocabulary {
        &self.target
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn source_key(&self, word: Option<&str>) -> Option<u32> {
        match word {
            None => Some(NULL),
            Some(w) => self.source.id(w).map(|id| id + 1),
        }
    }

    fn get(&self, src: u32, tgt: u32) -> f64 {
        self.probs.get(&(src, tgt)).copied().unwrap_or(self.default)
    }

    /// `t(target | source)`; `source = None` is the NULL word. Words outside
    /// the training vocabularies get probability 0.
    pub fn prob(&self, target: &str, source: Option<&str>) -> f64 {
        match (self.source_key(source), self.target.id(target)) {
            (Some(s), Some(t)) => self.get(s, t),
            _ => 0.0,
        }
    }

    /// Nonzero entries as `(source or None for NULL, target, probability)`.
    pub fn entries(&self) -> impl Iterator<Item = (Option<&str>, &str, f64)> {
        self.probs.iter().map(move |(&(s, t), &p)| {
            let src = (s != NULL).then(|| self.source.word(s - 1));
            (src, self.target.word(t), p)
        })
    }

    fn encode(&self, corpus: &ParallelCorpus) -> Vec<(Vec<u32>, Vec<u32>)> {
        corpus
            .pairs()
            .map(|(src, tgt)| {
                let mut s = vec![NULL];
                s.extend(src.iter().map(|w| self.source.id(w).expect("training vocabulary") + 1));
                let t = tgt
                    .iter()
                    .map(|w| self.target.id(w).expect("training vocabulary"))
                    .collect();
                (s, t)
            })
            .collect()
    }

    /// Corpus log-likelihood `Σ_pairs Σ_j ln( Σ_i t(e_j|f_i) / (l+1) )`, the
    /// sum over `i` running over the source words and NULL.
    pub fn log_likelihood(&self, corpus: &ParallelCorpus) -> f64 {
        let mut ll = 0.0;
        for (src, tgt) in self.encode(corpus) {
            let norm = src.len() as f64;
            for &e in &tgt {
                let total: f64 = src.iter().map(|&f| self.get(f, e)).sum();
                ll += ln(total / norm);
            }
        }
        ll
    }

    /// One EM iteration over `corpus`, which must be the corpus the table
    /// was created from.
    pub fn em_step(&mut self, corpus: &ParallelCorpus) {
        let mut counts: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut totals: BTreeMap<u32, f64> = BTreeMap::new();
        for (src, tgt) in self.encode(corpus) {
            for &e in &tgt {
                let denom: f64 = src.iter().map(|&f| self.get(f, e)).sum();
                if denom == 0.0 {
                    continue;
                }
                for &f in &src {
                    let c = self.get(f, e) / denom;
                    *counts.entry((f, e)).or_insert(0.0) += c;
                    *totals.entry(f).or_insert(0.0) += c;
                }
            }
        }
        self.probs = counts
            .into_iter()
            .map(|((f, e), c)| ((f, e), c / totals[&f]))
            .collect();
        self.default = 0.0;
        self.iterations += 1;
    }
}

/// IBM Model 1 EM from a uniform table.
pub fn train_ibm1(corpus: &ParallelCorpus, iterations: usize) -> Result<TranslationTable> {
    if iterations == 0 {
        return Err(Error::Config("IBM Model 1 needs at least one iteration".to_string()));
    }
    let mut table = TranslationTable::uniform(corpus);
    for _ in 0..iterations {
        table.em_step(corpus);
    }
    Ok(table)
}

/// For each target position, the linked source position (`None` = NULL).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentLinks(pub Vec<Option<usize>>);

impl AlignmentLinks {
    pub fn null_fraction(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().filter(|l| l.is_none()).count() as f64 / self.0.len() as f64
    }
}

/// Links every target word to the source word (or NULL) with the highest
/// `t(target|source)`. Real source words win ties against NULL and the
/// leftmost source position wins ties among them; a target word with zero
/// probability under every candidate links to NULL.
pub fn align(table: &TranslationTable, source: &[String], target: &[String]) -> AlignmentLinks {
    AlignmentLinks(
        target
            .iter()
            .map(|e| {
                let mut best: Option<(usize, f64)> = None;
                for (i, f) in source.iter().enumerate() {
                    let p = table.prob(e, Some(f));
                    if best.is_none_or(|(_, b)| p > b) {
                        best = Some((i, p));
                    }
                }
                let null = table.prob(e, None);
                match best {
                    Some((i, p)) if p > 0.0 && p >= null => Some(i),
                    _ => None,
                }
            })
            .collect(),
    )
}

pub fn align_corpus(table: &TranslationTable, corpus: &ParallelCorpus) -> Vec<AlignmentLinks> {
    corpus.pairs().map(|(s, t)| align(table, s, t)).collect()
}

/// Default share of NULL links above which a projected sentence is dropped.
pub const NULL_DROP_THRESHOLD: f64 = 0.5;

/// Copies each source tag to the target tokens linked to it. Tokens linked
/// to NULL get no tag; sentences whose NULL share exceeds `threshold` are
/// dropped.
pub fn project_tags(
    tagged_source: &[TaggedSentence],
    targets: &[Vec<String>],
    links: &[AlignmentLinks],
    threshold: f64,
) -> Result<Vec<PartialTaggedSentence>> {
    if tagged_source.len() != links.len() || targets.len() != links.len() {
        return Err(Error::Consistency(alloc::format!(
            "{} tagged source sentences, {} target sentences, {} link sets",
            tagged_source.len(),
            targets.len(),
            links.len()
        )));
    }
    let mut out = Vec::new();
    for (k, ((src, tgt), link)) in tagged_source.iter().zip(targets).zip(links).enumerate() {
        if link.0.len() != tgt.len() {
            return Err(Error::Consistency(alloc::format!(
                "sentence {}: {} target tokens but {} links",
                k,
                tgt.len(),
                link.0.len()
            )));
        }
        if link.0.iter().flatten().any(|&i| i >= src.len()) {
            return Err(Error::Consistency(alloc::format!(
                "sentence {}: link beyond the {} source tokens",
                k,
                src.len()
            )));
        }
        if link.null_fraction() > threshold {
            continue;
        }
        out.push(PartialTaggedSentence {
            tokens: tgt.clone(),
            tags: link.0.iter().map(|l| l.map(|i| src.tags[i])).collect(),
        });
    }
    Ok(out)
}
