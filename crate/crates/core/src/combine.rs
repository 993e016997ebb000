//! Linear interpolation of the projection HMM and the RNN tagger, the
//! two-fold tuning of the interpolation weight, and per-token accuracy.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::TaggedSentence;
use crate::math::argmax;
use crate::{Error, Result};

/// Probability distribution over a tagset for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct TagDistribution(Vec<f64>);

impl TagDistribution {
    /// Wraps `probs`, checking non-negativity and unit mass (±1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("empty tag distribution".to_string()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Consistency(
                "tag distribution has a negative or non-finite entry".to_string(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Consistency(alloc::format!(
                "tag distribution sums to {}",
                total
            )));
        }
        Ok(TagDistribution(probs))
    }

    /// Probability one on `tag`.
    pub fn one_hot(n_tags: usize, tag: usize) -> Self {
        let mut p = vec![0.0; n_tags];
        p[tag] = 1.0;
        TagDistribution(p)
    }

    pub fn uniform(n_tags: usize) -> Self {
        TagDistribution(vec![1.0 / n_tags as f64; n_tags])
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        TagDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most probable tag, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Interpolation weight of the projection model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinerConfig {
    pub mu: f64,
    pub grid_step: f64,
}

impl Default for CombinerConfig {
    fn default() -> Self {
        CombinerConfig {
            mu: 0.5,
            grid_step: 0.05,
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Config(alloc::format!("mu = {} is outside [0, 1]", mu)));
    }
    Ok(())
}

/// `mu * p1 + (1 - mu) * p2`.
pub fn interpolate(p1: &TagDistribution, p2: &TagDistribution, mu: f64) -> Result<TagDistribution> {
    check_mu(mu)?;
    if p1.len() != p2.len() {
        return Err(Error::Shape(alloc::format!(
            "distributions over {} and {} tags",
            p1.len(),
            p2.len()
        )));
    }
    Ok(TagDistribution(
        p1.0.iter()
            .zip(&p2.0)
            .map(|(&a, &b)| mu * a + (1.0 - mu) * b)
            .collect(),
    ))
}

/// Per-position argmax of the interpolated distributions.
pub fn combined_tag(hmm: &[TagDistribution], rnn: &[TagDistribution], mu: f64) -> Result<Vec<usize>> {
    if hmm.len() != rnn.len() {
        return Err(Error::Consistency(alloc::format!(
            "{} HMM distributions but {} RNN distributions",
            hmm.len(),
            rnn.len()
        )));
    }
    hmm.iter()
        .zip(rnn)
        .map(|(p1, p2)| interpolate(p1, p2, mu).map(|p| p.argmax()))
        .collect()
}

/// The μ grid `0, step, 2·step, …, 1`.
pub fn mu_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(alloc::format!("grid step {} not in (0, 1]", step)));
    }
    let n = libm::round(1.0 / step) as usize;
    if (n as f64 * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(alloc::format!(
            "grid step {} does not divide [0, 1]",
            step
        )));
    }
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Token-level outputs of both systems on one test sentence.
#[derive(Debug, Clone)]
pub struct SystemOutputs {
    pub hmm: Vec<TagDistribution>,
    pub rnn: Vec<TagDistribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_tags: usize,
    pub total: usize,
    pub correct: usize,
    pub oov_total: usize,
    pub oov_correct: usize,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    fn empty(n_tags: usize) -> Self {
        EvalReport {
            n_tags,
            total: 0,
            correct: 0,
            oov_total: 0,
            oov_correct: 0,
            confusion: vec![vec![0; n_tags]; n_tags],
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    /// Accuracy on out-of-vocabulary tokens, absent when there are none.
    pub fn oov_accuracy(&self) -> Option<f64> {
        (self.oov_total > 0).then(|| self.oov_correct as f64 / self.oov_total as f64)
    }

    fn add(&mut self, gold: usize, predicted: usize, oov: bool) {
        self.total += 1;
        let hit = gold == predicted;
        self.correct += hit as usize;
        if oov {
            self.oov_total += 1;
            self.oov_correct += hit as usize;
        }
        self.confusion[gold][predicted] += 1;
    }

    fn merge(&mut self, other: &EvalReport) {
        self.total += other.total;
        self.correct += other.correct;
        self.oov_total += other.oov_total;
        self.oov_correct += other.oov_correct;
        for (row, orow) in self.confusion.iter_mut().zip(&other.confusion) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }
}

/// Scores predictions against gold tags. `oov[s][t]` flags token `t` of
/// sentence `s` as out of vocabulary.
pub fn evaluate(
    gold: &[TaggedSentence],
    predicted: &[Vec<usize>],
    oov: &[Vec<bool>],
    n_tags: usize,
) -> Result<EvalReport> {
    if gold.len() != predicted.len() || gold.len() != oov.len() {
        return Err(Error::Consistency(alloc::format!(
            "{} gold sentences, {} predicted, {} OOV rows",
            gold.len(),
            predicted.len(),
            oov.len()
        )));
    }
    let mut report = EvalReport::empty(n_tags);
    for (i, ((g, p), o)) in gold.iter().zip(predicted).zip(oov).enumerate() {
        if g.tags.len() != p.len() || g.tags.len() != o.len() {
            return Err(Error::Consistency(alloc::format!(
                "sentence {}: {} gold tags, {} predicted, {} OOV flags",
                i,
                g.tags.len(),
                p.len(),
                o.len()
            )));
        }
        for ((&gt, &pt), &is_oov) in g.tags.iter().zip(p).zip(o) {
            if gt >= n_tags || pt >= n_tags {
                return Err(Error::Consistency(alloc::format!(
                    "sentence {}: tag index out of range for {} tags",
                    i,
                    n_tags
                )));
            }
            report.add(gt, pt, is_oov);
        }
    }
    Ok(report)
}

/// Outcome of two-fold μ tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedCombination {
    /// μ selected on the first half (applied to the second half).
    pub mu_first_half: f64,
    /// μ selected on the second half (applied to the first half).
    pub mu_second_half: f64,
    /// Pooled report over both halves, each tagged with the other's μ.
    pub report: EvalReport,
}

fn tag_all(outputs: &[SystemOutputs], mu: f64) -> Result<Vec<Vec<usize>>> {
    outputs.iter().map(|o| combined_tag(&o.hmm, &o.rnn, mu)).collect()
}

fn best_mu(
    gold: &[TaggedSentence],
    outputs: &[SystemOutputs],
    oov: &[Vec<bool>],
    grid: &[f64],
    n_tags: usize,
) -> Result<f64> {
    let mut best = (grid[0], 0usize);
    for (k, &mu) in grid.iter().enumerate() {
        let report = evaluate(gold, &tag_all(outputs, mu)?, oov, n_tags)?;
        // Strict improvement keeps the smaller μ on ties.
        if k == 0 || report.correct > best.1 {
            best = (mu, report.correct);
        }
    }
    Ok(best.0)
}

/// Two-fold cross-validation of μ: the first ⌈S/2⌉ sentences form one half,
/// the rest the other. Each half is tagged with the μ that maximises
/// accuracy on the other half.
pub fn tune_mu(
    gold: &[TaggedSentence],
    outputs: &[SystemOutputs],
    oov: &[Vec<bool>],
    n_tags: usize,
    grid_step: f64,
) -> Result<TunedCombination> {
    if gold.len() < 2 {
        return Err(Error::Consistency(
            "mu tuning needs at least two test sentences".to_string(),
        ));
    }
    if outputs.len() != gold.len() || oov.len() != gold.len() {
        return Err(Error::Consistency(alloc::format!(
            "{} gold sentences, {} system outputs, {} OOV rows",
            gold.len(),
            outputs.len(),
            oov.len()
        )));
    }
    let grid = mu_grid(grid_step)?;
    let split = gold.len().div_ceil(2);
    let (g1, g2) = gold.split_at(split);
    let (o1, o2) = outputs.split_at(split);
    let (v1, v2) = oov.split_at(split);

    let mu_first_half = best_mu(g1, o1, v1, &grid, n_tags)?;
    let mu_second_half = best_mu(g2, o2, v2, &grid, n_tags)?;

    let mut report = evaluate(g1, &tag_all(o1, mu_second_half)?, v1, n_tags)?;
    report.merge(&evaluate(g2, &tag_all(o2, mu_first_half)?, v2, n_tags)?);
    Ok(TunedCombination {
        mu_first_half,
        mu_second_half,
        report,
    })
}

/// Tags every sentence with a fixed μ and scores it.
pub fn evaluate_fixed_mu(
    gold: &[TaggedSentence],
    outputs: &[SystemOutputs],
    oov: &[Vec<bool>],
    n_tags: usize,
    mu: f64,
) -> Result<EvalReport> {
    evaluate(gold, &tag_all(outputs, mu)?, oov, n_tags)
}
