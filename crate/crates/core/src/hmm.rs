//! TnT-style trigram HMM tagger.
//!
//! Transitions interpolate unigram, bigram and trigram estimates with
//! weights set by deleted interpolation. Known words use maximum-likelihood
//! emissions; unknown words are scored by a suffix model built from rare
//! words with successive abstraction. Decoding is exact (no beam), in log
//! space. Sentences are padded with a boundary symbol: two at the start as
//! context and one at the end as the final predicted symbol.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::combine::TagDistribution;
use crate::corpus::{PartialTaggedSentence, TagSet, TaggedSentence};
use crate::math::{exp, ln, log_sum_exp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HmmConfig {
    /// Words seen at most this often feed the suffix model.
    pub rare_threshold: u64,
    /// Longest suffix (in characters) used for unknown words.
    pub max_suffix: usize,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig {
            rare_threshold: 10,
            max_suffix: 4,
        }
    }
}

/// Raw counts a model is estimated from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HmmCounts {
    /// Predicted-symbol counts, indexed `0..=T` (`T` is the sentence end).
    pub unigram: Vec<u64>,
    /// `(T+1)^2`, indexed `prev * (T+1) + next`.
    pub bigram: Vec<u64>,
    /// `(T+1)^3`, indexed `(prev2 * (T+1) + prev1) * (T+1) + next`.
    pub trigram: Vec<u64>,
    /// Per-word tag counts of tagged tokens.
    pub lexicon: BTreeMap<String, Vec<u64>>,
    /// Per-suffix tag counts over rare words.
    pub suffixes: BTreeMap<String, Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    tagset: TagSet,
    config: HmmConfig,
    counts: HmmCounts,
    lambdas: [f64; 3],
    theta: f64,
    tag_counts: Vec<u64>,
    log_trans: Vec<f64>,
}

fn suffixes_of(word: &str, max: usize) -> impl Iterator<Item = &str> {
    let starts: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
    let n = starts.len();
    (1..=max.min(n)).map(move |len| &word[starts[n - len]..])
}

impl HmmModel {
    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn config(&self) -> HmmConfig {
        self.config
    }

    pub fn counts(&self) -> &HmmCounts {
        &self.counts
    }

    /// Deleted-interpolation weights `[unigram, bigram, trigram]`.
    pub fn lambdas(&self) -> [f64; 3] {
        self.lambdas
    }

    /// Successive-abstraction weight of the suffix model.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_tags(&self) -> usize {
        self.tagset.len()
    }

    /// Index of the boundary symbol in transition tables.
    pub fn boundary(&self) -> usize {
        self.n_tags()
    }

    /// Rebuilds a model from stored counts and weights.
    pub fn from_parts(
        tagset: TagSet,
        config: HmmConfig,
        counts: HmmCounts,
        lambdas: [f64; 3],
        theta: f64,
    ) -> Result<Self> {
        let s = tagset.len() + 1;
        if counts.unigram.len() != s || counts.bigram.len() != s * s || counts.trigram.len() != s * s * s {
            return Err(Error::Shape("HMM count tables do not match the tagset".to_string()));
        }
        let t = tagset.len();
        if counts.lexicon.values().chain(counts.suffixes.values()).any(|c| c.len() != t) {
            return Err(Error::Shape("lexicon rows do not match the tagset".to_string()));
        }
        if lambdas.iter().any(|l| !(*l >= 0.0)) || (lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Consistency("interpolation weights must sum to 1".to_string()));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::Consistency("suffix weight must be finite and non-negative".to_string()));
        }
        let mut tag_counts = vec![0u64; t];
        for row in counts.lexicon.values() {
            for (a, b) in tag_counts.iter_mut().zip(row) {
                *a += b;
            }
        }
        let mut model = HmmModel {
            tagset,
            config,
            counts,
            lambdas,
            theta,
            tag_counts,
            log_trans: Vec::new(),
        };
        model.log_trans = model.transition_table();
        Ok(model)
    }

    /// Smoothed `P(next | prev2, prev1)` over `next ∈ 0..=T`.
    pub fn transition(&self, prev2: usize, prev1: usize, next: usize) -> f64 {
        let s = self.n_tags() + 1;
        let c = &self.counts;
        let n: u64 = c.unigram.iter().sum();
        let p1 = if n > 0 {
            c.unigram[next] as f64 / n as f64
        } else {
            1.0 / s as f64
        };
        let ctx1: u64 = c.bigram[prev1 * s..(prev1 + 1) * s].iter().sum();
        let p2 = if ctx1 > 0 {
            c.bigram[prev1 * s + next] as f64 / ctx1 as f64
        } else {
            p1
        };
        let base = (prev2 * s + prev1) * s;
        let ctx2: u64 = c.trigram[base..base + s].iter().sum();
        let p3 = if ctx2 > 0 {
            c.trigram[base + next] as f64 / ctx2 as f64
        } else {
            p2
        };
        self.lambdas[0] * p1 + self.lambdas[1] * p2 + self.lambdas[2] * p3
    }

    fn transition_table(&self) -> Vec<f64> {
        let s = self.n_tags() + 1;
        let mut table = vec![0.0; s * s * s];
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    table[(a * s + b) * s + c] = ln(self.transition(a, b, c));
                }
            }
        }
        table
    }

    /// Log transition table, indexed `(prev2 * (T+1) + prev1) * (T+1) + next`.
    pub fn log_transitions(&self) -> &[f64] {
        &self.log_trans
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.counts.lexicon.contains_key(word)
    }

    /// Log emission scores of `word` for every tag. Known words get
    /// `ln P(word|tag)`; unknown words get `ln P(tag|suffix) - ln P(tag)`,
    /// which equals `ln P(word|tag)` up to a constant shared by all tags.
    pub fn log_emissions(&self, word: &str) -> Vec<f64> {
        let t = self.n_tags();
        if let Some(row) = self.counts.lexicon.get(word) {
            return (0..t)
                .map(|k| {
                    if self.tag_counts[k] == 0 {
                        f64::NEG_INFINITY
                    } else {
                        ln(row[k] as f64 / self.tag_counts[k] as f64)
                    }
                })
                .collect();
        }
        let total: u64 = self.tag_counts.iter().sum();
        if total == 0 {
            return vec![0.0; t];
        }
        let prior: Vec<f64> = self.tag_counts.iter().map(|&c| c as f64 / total as f64).collect();
        let mut p = prior.clone();
        for suffix in suffixes_of(word, self.config.max_suffix) {
            let Some(row) = self.counts.suffixes.get(suffix) else {
                break;
            };
            let n: u64 = row.iter().sum();
            for k in 0..t {
                let ml = row[k] as f64 / n as f64;
                p[k] = (ml + self.theta * p[k]) / (1.0 + self.theta);
            }
        }
        p.iter()
            .zip(&prior)
            .map(|(&pk, &q)| if q == 0.0 { f64::NEG_INFINITY } else { ln(pk / q) })
            .collect()
    }

    pub fn lattice(&self, tokens: &[String]) -> Lattice<'_> {
        Lattice {
            n_tags: self.n_tags(),
            log_trans: &self.log_trans,
            log_emit: tokens.iter().map(|w| self.log_emissions(w)).collect(),
        }
    }

    /// Most probable tag sequence.
    pub fn viterbi(&self, tokens: &[String]) -> Vec<usize> {
        self.lattice(tokens).viterbi().0
    }

    /// Per-position tag marginals from forward–backward.
    pub fn posterior(&self, tokens: &[String]) -> Vec<TagDistribution> {
        self.lattice(tokens)
            .marginals()
            .into_iter()
            .map(TagDistribution::from_raw)
            .collect()
    }
}

/// Trains on fully tagged sentences.
pub fn train_hmm(corpus: &[TaggedSentence], tagset: &TagSet, config: HmmConfig) -> Result<HmmModel> {
    let partial: Vec<PartialTaggedSentence> = corpus.iter().map(PartialTaggedSentence::from).collect();
    train_hmm_partial(&partial, tagset, config)
}

/// Trains on sentences whose untagged tokens (`None`) are kept for context
/// but contribute no emission counts and no n-gram involving them.
pub fn train_hmm_partial(corpus: &[PartialTaggedSentence], tagset: &TagSet, config: HmmConfig) -> Result<HmmModel> {
    if corpus.iter().all(|s| s.tags.iter().all(Option::is_none)) {
        return Err(Error::Training("no tagged tokens to train the HMM on".to_string()));
    }
    let t = tagset.len();
    let s = t + 1;
    let boundary = t;
    let mut counts = HmmCounts {
        unigram: vec![0; s],
        bigram: vec![0; s * s],
        trigram: vec![0; s * s * s],
        lexicon: BTreeMap::new(),
        suffixes: BTreeMap::new(),
    };
    for (k, sentence) in corpus.iter().enumerate() {
        if sentence.tokens.len() != sentence.tags.len() {
            return Err(Error::Consistency(alloc::format!(
                "sentence {}: {} tokens but {} tags",
                k,
                sentence.tokens.len(),
                sentence.tags.len()
            )));
        }
        if let Some(bad) = sentence.tags.iter().flatten().find(|&&x| x >= t) {
            return Err(Error::Consistency(alloc::format!("tag index {} out of range", bad)));
        }
        let mut padded: Vec<Option<usize>> = vec![Some(boundary), Some(boundary)];
        padded.extend(sentence.tags.iter().copied());
        padded.push(Some(boundary));
        for i in 2..padded.len() {
            let Some(c) = padded[i] else { continue };
            counts.unigram[c] += 1;
            let Some(b) = padded[i - 1] else { continue };
            counts.bigram[b * s + c] += 1;
            let Some(a) = padded[i - 2] else { continue };
            counts.trigram[(a * s + b) * s + c] += 1;
        }
        for (word, tag) in sentence.tokens.iter().zip(&sentence.tags) {
            if let Some(tag) = tag {
                counts.lexicon.entry(word.clone()).or_insert_with(|| vec![0; t])[*tag] += 1;
            }
        }
    }
    for (word, row) in &counts.lexicon {
        if row.iter().sum::<u64>() > config.rare_threshold {
            continue;
        }
        for suffix in suffixes_of(word, config.max_suffix) {
            let entry = counts.suffixes.entry(suffix.to_string()).or_insert_with(|| vec![0; t]);
            for (a, b) in entry.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let lambdas = deleted_interpolation(&counts, s);
    let theta = suffix_theta(&counts.lexicon, t);
    HmmModel::from_parts(tagset.clone(), config, counts, lambdas, theta)
}

/// TnT deleted interpolation: every trigram occurrence votes, with its
/// count, for the order whose held-out estimate (the n-gram removed from
/// the counts) is largest. Ties favour the higher order.
fn deleted_interpolation(counts: &HmmCounts, s: usize) -> [f64; 3] {
    let n: u64 = counts.unigram.iter().sum();
    let ratio = |num: u64, den: u64| {
        if den > 1 {
            (num as f64 - 1.0) / (den as f64 - 1.0)
        } else {
            0.0
        }
    };
    let mut weights = [0.0; 3];
    for a in 0..s {
        for b in 0..s {
            let base = (a * s + b) * s;
            let ctx2: u64 = counts.trigram[base..base + s].iter().sum();
            let ctx1: u64 = counts.bigram[b * s..(b + 1) * s].iter().sum();
            for c in 0..s {
                let f = counts.trigram[base + c];
                if f == 0 {
                    continue;
                }
                let c3 = ratio(f, ctx2);
                let c2 = ratio(counts.bigram[b * s + c], ctx1);
                let c1 = ratio(counts.unigram[c], n);
                let slot = if c3 >= c2 && c3 >= c1 {
                    2
                } else if c2 >= c1 {
                    1
                } else {
                    0
                };
                weights[slot] += f as f64;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return [1.0, 0.0, 0.0];
    }
    weights.map(|w| w / total)
}

/// Sample variance of the unconditioned tag probabilities.
fn suffix_theta(lexicon: &BTreeMap<String, Vec<u64>>, t: usize) -> f64 {
    if t < 2 {
        return 0.0;
    }
    let mut totals = vec![0u64; t];
    for row in lexicon.values() {
        for (a, b) in totals.iter_mut().zip(row) {
            *a += b;
        }
    }
    let n: u64 = totals.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let p: Vec<f64> = totals.iter().map(|&c| c as f64 / n as f64).collect();
    let mean = p.iter().sum::<f64>() / t as f64;
    p.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1) as f64
}

/// Scores of one sentence under a trigram HMM: a log transition table over
/// `T + 1` symbols (the last being the boundary) and per-token log emission
/// scores over the `T` tags.
#[derive(Debug, Clone)]
pub struct Lattice<'a> {
    pub n_tags: usize,
    pub log_trans: &'a [f64],
    pub log_emit: Vec<Vec<f64>>,
}

impl Lattice<'_> {
    #[inline]
    fn lt(&self, a: usize, b: usize, c: usize) -> f64 {
        let s = self.n_tags + 1;
        self.log_trans[(a * s + b) * s + c]
    }

    fn len(&self) -> usize {
        self.log_emit.len()
    }

    /// Symbols that can precede position `i` (as `t_{i-1}`).
    fn prev_states(&self, i: usize) -> core::ops::Range<usize> {
        if i == 0 {
            self.n_tags..self.n_tags + 1
        } else {
            0..self.n_tags
        }
    }

    /// Best tag sequence and its log score. Among exactly tied optima the
    /// lexicographically smallest sequence is returned.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let t = self.n_tags;
        let s = t + 1;
        let bnd = t;
        let n = self.len();
        if n == 0 {
            return (Vec::new(), self.lt(bnd, bnd, bnd));
        }
        // back[i][a * s + b]: best score of positions i+1.. (plus the end
        // transition) given t_{i-1} = a, t_i = b.
        let mut back = vec![vec![f64::NEG_INFINITY; s * s]; n];
        for a in 0..s {
            for b in 0..t {
                back[n - 1][a * s + b] = self.lt(a, b, bnd);
            }
        }
        for i in (0..n - 1).rev() {
            for a in self.prev_states(i) {
                for b in 0..t {
                    let mut best = f64::NEG_INFINITY;
                    for c in 0..t {
                        let v = self.lt(a, b, c) + self.log_emit[i + 1][c] + back[i + 1][b * s + c];
                        if v > best {
                            best = v;
                        }
                    }
                    back[i][a * s + b] = best;
                }
            }
        }
        // Greedy forward pass: smallest tag that attains the optimum.
        let (mut p2, mut p1) = (bnd, bnd);
        let mut tags = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let mut best = (0usize, f64::NEG_INFINITY);
            for c in 0..t {
                let v = self.lt(p2, p1, c) + self.log_emit[i][c] + back[i][p1 * s + c];
                if v > best.1 {
                    best = (c, v);
                }
            }
            let c = best.0;
            total += self.lt(p2, p1, c) + self.log_emit[i][c];
            tags.push(c);
            p2 = p1;
            p1 = c;
        }
        total += self.lt(p2, p1, bnd);
        (tags, total)
    }

    /// Forward log scores `alpha[i][a * s + b]` with `t_{i-1} = a, t_i = b`.
    fn forward(&self) -> Vec<Vec<f64>> {
        let t = self.n_tags;
        let s = t + 1;
        let bnd = t;
        let n = self.len();
        let mut alpha = vec![vec![f64::NEG_INFINITY; s * s]; n];
        for b in 0..t {
            alpha[0][bnd * s + b] = self.lt(bnd, bnd, b) + self.log_emit[0][b];
        }
        for i in 1..n {
            for b in 0..t {
                for c in 0..t {
                    let v = log_sum_exp(self.prev_states(i - 1).map(|a| alpha[i - 1][a * s + b] + self.lt(a, b, c)));
                    alpha[i][b * s + c] = v + self.log_emit[i][c];
                }
            }
        }
        alpha
    }

    fn backward(&self) -> Vec<Vec<f64>> {
        let t = self.n_tags;
        let s = t + 1;
        let bnd = t;
        let n = self.len();
        let mut beta = vec![vec![f64::NEG_INFINITY; s * s]; n];
        for a in 0..s {
            for b in 0..t {
                beta[n - 1][a * s + b] = self.lt(a, b, bnd);
            }
        }
        for i in (0..n - 1).rev() {
            for a in self.prev_states(i) {
                for b in 0..t {
                    beta[i][a * s + b] =
                        log_sum_exp((0..t).map(|c| self.lt(a, b, c) + self.log_emit[i + 1][c] + beta[i + 1][b * s + c]));
                }
            }
        }
        beta
    }

    /// Log of the total score summed over all tag sequences.
    pub fn log_likelihood(&self) -> f64 {
        let t = self.n_tags;
        let s = t + 1;
        let n = self.len();
        if n == 0 {
            return self.lt(t, t, t);
        }
        let alpha = self.forward();
        log_sum_exp((0..s * s).map(|k| alpha[n - 1][k] + self.lt(k / s, k % s, t)))
    }

    /// Posterior tag marginals per position. A sentence with no admissible
    /// tag sequence gets uniform marginals.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let t = self.n_tags;
        let s = t + 1;
        let n = self.len();
        if n == 0 {
            return Vec::new();
        }
        let alpha = self.forward();
        let beta = self.backward();
        let log_z = log_sum_exp((0..s * s).map(|k| alpha[0][k] + beta[0][k]));
        (0..n)
            .map(|i| {
                if log_z == f64::NEG_INFINITY {
                    return vec![1.0 / t as f64; t];
                }
                let mut m: Vec<f64> = (0..t)
                    .map(|b| (0..s).map(|a| exp(alpha[i][a * s + b] + beta[i][a * s + b] - log_z)).sum())
                    .collect();
                let total: f64 = m.iter().sum();
                m.iter_mut().for_each(|x| *x /= total);
                m
            })
            .collect()
    }
}
