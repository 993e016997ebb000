//! Continuous bag-of-words embeddings with negative sampling, used to swap
//! an out-of-vocabulary test word for the known word its context predicts.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentence, Side};
use crate::math::{exp, ln, sigmoid};
use crate::matrix::{axpy, dot};
use crate::repr::ReprTable;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub window: usize,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            window: 5,
            dim: 100,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowModel {
    words: Vec<String>,
    index: BTreeMap<String, u32>,
    counts: Vec<u64>,
    window: usize,
    dim: usize,
    negatives: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NoiseTable(Vec<f64>);

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        NoiseTable(
            counts
                .iter()
                .map(|&c| {
                    acc += libm::pow(c as f64, 0.75);
                    acc
                })
                .collect(),
        )
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.0.last().expect("nonempty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.0.partition_point(|&c| c <= x).min(self.0.len() - 1)
    }
}

impl CbowModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        words: Vec<String>,
        counts: Vec<u64>,
        window: usize,
        dim: usize,
        negatives: usize,
        input: Vec<f64>,
        output: Vec<f64>,
    ) -> Result<Self> {
        let v = words.len();
        if counts.len() != v || input.len() != v * dim || output.len() != v * dim {
            return Err(Error::Shape("CBOW matrices do not match the vocabulary".to_string()));
        }
        if input.iter().chain(&output).any(|x| !x.is_finite()) {
            return Err(Error::Shape("non-finite CBOW weight".to_string()));
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Consistency(alloc::format!("duplicate CBOW word `{}`", w)));
            }
        }
        Ok(CbowModel {
            words,
            index,
            counts,
            window,
            dim,
            negatives,
            input,
            output,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn negatives(&self) -> usize {
        self.negatives
    }

    pub fn input_matrix(&self) -> &[f64] {
        &self.input
    }

    pub fn output_matrix(&self) -> &[f64] {
        &self.output
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| i as usize)
    }

    pub fn input_vector(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_vector(&self, id: usize) -> &[f64] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }

    /// Cosine similarity of two words' input embeddings.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.input_vector(self.id(a)?), self.input_vector(self.id(b)?));
        let norm = crate::math::sqrt(dot(x, x) * dot(y, y));
        Some(if norm == 0.0 { 0.0 } else { dot(x, y) / norm })
    }

    /// Mean input embedding of the in-vocabulary context words, if any.
    pub fn context_vector<'a>(&self, context: impl IntoIterator<Item = &'a str>) -> Option<Vec<f64>> {
        let mut h = vec![0.0; self.dim];
        let mut n = 0usize;
        for w in context {
            if let Some(id) = self.id(w) {
                axpy(1.0, self.input_vector(id), &mut h);
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        h.iter_mut().for_each(|x| *x /= n as f64);
        Some(h)
    }

    /// Negative-sampling objective `-ln σ(h·v'_w) - Σ ln σ(-h·v'_n)` summed
    /// over every position of `sentences`, with the noise words drawn from
    /// `seed`.
    pub fn loss(&self, sentences: &[Sentence], seed: u64) -> f64 {
        let noise = NoiseTable::new(&self.counts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        for (target, h) in self.training_pairs(sentences) {
            total -= ln(sigmoid(dot(&h, self.output_vector(target))));
            for _ in 0..self.negatives {
                let n = noise.sample(&mut rng);
                if n != target {
                    total -= ln(sigmoid(-dot(&h, self.output_vector(n))));
                }
            }
        }
        total
    }

    fn training_pairs<'a>(&'a self, sentences: &'a [Sentence]) -> impl Iterator<Item = (usize, Vec<f64>)> + 'a {
        sentences.iter().flat_map(move |s| {
            (0..s.len()).filter_map(move |pos| {
                let target = self.id(&s[pos])?;
                let h = self.context_vector(context_window(s, pos, self.window))?;
                Some((target, h))
            })
        })
    }
}

/// Tokens within `window` positions of `pos`, clipped at the sentence
/// boundaries, excluding `pos` itself.
pub fn context_window(tokens: &[String], pos: usize, window: usize) -> impl Iterator<Item = &str> {
    let lo = pos.saturating_sub(window);
    let hi = (pos + window + 1).min(tokens.len());
    (lo..hi).filter(move |&i| i != pos).map(move |i| tokens[i].as_str())
}

/// Trains CBOW with negative sampling. The learning rate decays linearly to
/// `1e-4` of its initial value over all epochs.
pub fn train_cbow(sentences: &[Sentence], config: &CbowConfig) -> Result<CbowModel> {
    if config.window == 0 || config.dim == 0 {
        return Err(Error::Config("CBOW window and dimension must be at least 1".to_string()));
    }
    let mut words = Vec::new();
    let mut index = BTreeMap::new();
    let mut counts: Vec<u64> = Vec::new();
    for s in sentences {
        for w in s {
            let id = *index.entry(w.clone()).or_insert_with(|| {
                words.push(w.clone());
                counts.push(0);
                words.len() as u32 - 1
            });
            counts[id as usize] += 1;
        }
    }
    if words.is_empty() {
        return Err(Error::Training("empty CBOW corpus".to_string()));
    }
    let v = words.len();
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / dim as f64;
    let input: Vec<f64> = (0..v * dim).map(|_| rng.gen_range(-half..half)).collect();
    let mut model = CbowModel {
        words,
        index,
        counts,
        window: config.window,
        dim,
        negatives: config.negatives,
        input,
        output: vec![0.0; v * dim],
    };

    let noise = NoiseTable::new(&model.counts);
    let total_tokens: u64 = model.counts.iter().sum();
    let total_steps = (total_tokens * config.epochs as u64).max(1) as f64;
    let min_lr = config.learning_rate * 1e-4;
    let mut step = 0u64;
    let mut neu1e = vec![0.0; dim];
    for _ in 0..config.epochs {
        for s in sentences {
            let ids: Vec<usize> = s.iter().map(|w| model.id(w).expect("indexed")).collect();
            for pos in 0..ids.len() {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps)).max(min_lr);
                step += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(ids.len());
                let context: Vec<usize> = (lo..hi).filter(|&i| i != pos).map(|i| ids[i]).collect();
                if context.is_empty() {
                    continue;
                }
                let mut h = vec![0.0; dim];
                for &c in &context {
                    axpy(1.0, model.input_vector(c), &mut h);
                }
                h.iter_mut().for_each(|x| *x /= context.len() as f64);

                neu1e.iter_mut().for_each(|x| *x = 0.0);
                let target = ids[pos];
                for d in 0..=config.negatives {
                    let (word, label) = if d == 0 {
                        (target, 1.0)
                    } else {
                        let n = noise.sample(&mut rng);
                        if n == target {
                            continue;
                        }
                        (n, 0.0)
                    };
                    let out = &mut model.output[word * dim..(word + 1) * dim];
                    let g = (label - sigmoid(dot(&h, out))) * lr;
                    axpy(g, out, &mut neu1e);
                    axpy(g, &h, out);
                }
                for &c in &context {
                    axpy(1.0, &neu1e, &mut model.input[c * dim..(c + 1) * dim]);
                }
            }
        }
    }
    if model.input.iter().chain(&model.output).any(|x| !x.is_finite()) {
        return Err(Error::Training("CBOW weights became non-finite".to_string()));
    }
    Ok(model)
}

/// Replaces an out-of-vocabulary `word` by the known word (nonempty common
/// vector on `side`, present in the CBOW vocabulary) with the highest
/// context score `h·v'_w`, where `h` averages the input embeddings of the
/// in-vocabulary context words. Ties go to the lowest CBOW id. The word is
/// returned unchanged if it is already known or no context word is in the
/// CBOW vocabulary.
pub fn resolve_oov<'a>(
    word: &'a str,
    context: &[&str],
    cbow: &'a CbowModel,
    repr: &ReprTable,
    side: Side,
) -> &'a str {
    if repr.is_known(side, word) {
        return word;
    }
    let Some(h) = cbow.context_vector(context.iter().copied()) else {
        return word;
    };
    let mut best: Option<(usize, f64)> = None;
    for (id, candidate) in cbow.words.iter().enumerate() {
        if !repr.is_known(side, candidate) {
            continue;
        }
        let score = dot(&h, cbow.output_vector(id));
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((id, score));
        }
    }
    best.map_or(word, |(id, _)| cbow.words[id].as_str())
}

/// Probability the model assigns to `word` given `context`, normalised over
/// the whole vocabulary (a softmax over `h·v'`). Mostly useful for
/// inspection; resolution ranks by the raw score.
pub fn context_probability(cbow: &CbowModel, context: &[&str], word: &str) -> Option<f64> {
    let h = cbow.context_vector(context.iter().copied())?;
    let id = cbow.id(word)?;
    let scores: Vec<f64> = (0..cbow.words.len()).map(|i| dot(&h, cbow.output_vector(i))).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| exp(s - max)).sum();
    Some(exp(scores[id] - max) / z)
}
