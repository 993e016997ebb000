//! Central finite-difference check of the BPTT gradients.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RnnConfig, RnnModel};
use crate::corpus::TagSet;
use crate::matrix::Matrix;
use crate::repr::CommonWordVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub n_params: usize,
}

/// Relative errors are measured against `max(|analytic| + |numeric|, 1e-6)`
/// so that gradients that are zero up to rounding do not blow up the ratio.
const RELATIVE_FLOOR: f64 = 1e-6;

/// Compares every analytic weight gradient of `model` on one sentence with
/// central finite differences of step `epsilon`.
pub fn check_model(
    model: &RnnModel,
    sentence: &[&CommonWordVector],
    pos: Option<&[usize]>,
    gold: &[usize],
    epsilon: f64,
) -> Result<GradientCheck> {
    let (_, grads) = model.gradients(sentence, pos, gold)?;
    let analytic = grads.to_dense(model, sentence);
    let mut probe = model.clone();
    let mut result = GradientCheck {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        n_params: 0,
    };
    for (k, a) in analytic.iter().enumerate() {
        for j in 0..a.as_slice().len() {
            let original = probe.weights().matrices()[k].as_slice()[j];
            probe.weights_mut().matrices_mut()[k].as_mut_slice()[j] = original + epsilon;
            let plus = probe.loss(sentence, pos, gold)?;
            probe.weights_mut().matrices_mut()[k].as_mut_slice()[j] = original - epsilon;
            let minus = probe.loss(sentence, pos, gold)?;
            probe.weights_mut().matrices_mut()[k].as_mut_slice()[j] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = a.as_slice()[j];
            let abs = (numeric - exact).abs();
            let rel = abs / (numeric.abs() + exact.abs()).max(RELATIVE_FLOOR);
            if !(abs.is_finite() && rel.is_finite()) {
                return Err(Error::Training("non-finite gradient".to_string()));
            }
            result.max_absolute_error = result.max_absolute_error.max(abs);
            result.max_relative_error = result.max_relative_error.max(rel);
            result.n_params += 1;
        }
    }
    Ok(result)
}

/// Builds a random model for `config` (at most 10 neurons per layer, input
/// dimension at most 20) and a random 3-token sentence, then runs
/// [`check_model`]. Randomness comes from `config.seed`.
pub fn gradient_check(config: &RnnConfig, input_dim: usize, n_tags: usize, epsilon: f64) -> Result<GradientCheck> {
    if config.forward_size > 10 || config.compression_size > 10 || input_dim > 20 || input_dim == 0 {
        return Err(Error::Config(
            "gradient check expects at most 10 neurons per layer and 1..=20 inputs".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let label = |prefix: &str, n: usize| {
        TagSet::new(prefix, (0..n).map(|i| alloc::format!("{}{}", prefix, i)).collect())
    };
    let pos_tagset = if config.pos_tagset_size > 0 {
        Some(label("P", config.pos_tagset_size)?)
    } else {
        None
    };
    let model = RnnModel::with_init(config.clone(), input_dim, label("T", n_tags)?, pos_tagset, |r, c| {
        Matrix::uniform(r, c, 0.5, &mut rng)
    })?;
    let sentence: Vec<CommonWordVector> = (0..3)
        .map(|_| {
            let idx = (0..input_dim as u32).filter(|_| rng.gen_bool(0.3)).collect();
            CommonWordVector::new(idx, input_dim)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&CommonWordVector> = sentence.iter().collect();
    let gold: Vec<usize> = (0..3).map(|_| rng.gen_range(0..n_tags)).collect();
    let pos: Option<Vec<usize>> = (config.pos_tagset_size > 0)
        .then(|| (0..3).map(|_| rng.gen_range(0..config.pos_tagset_size)).collect());
    check_model(&model, &refs, pos.as_deref(), &gold, epsilon)
}
