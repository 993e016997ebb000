//! SGD training with validation-driven learning-rate halving.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::RnnModel;
use crate::math::argmax;
use crate::repr::CommonWordVector;
use crate::{Error, Result};

/// One annotated sentence, already mapped to common vectors.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub inputs: Vec<&'a CommonWordVector>,
    pub tags: Vec<usize>,
    pub pos: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Learning rate used during this epoch.
    pub learning_rate: f64,
    pub train_loss: f64,
    pub valid_accuracy: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStep {
    Continue,
    Stop,
}

/// Halves the learning rate after every epoch whose validation accuracy
/// does not beat the best so far, and stops after `patience` such epochs in
/// a row.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    lr: f64,
    best: Option<f64>,
    stale: usize,
    patience: usize,
}

impl LrSchedule {
    pub const PATIENCE: usize = 2;

    pub fn new(lr: f64) -> Self {
        LrSchedule {
            lr,
            best: None,
            stale: 0,
            patience: Self::PATIENCE,
        }
    }

    /// Learning rate for the next epoch.
    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Records an epoch's validation accuracy. Returns whether it improved
    /// and whether training should continue.
    pub fn observe(&mut self, accuracy: f64) -> (bool, ScheduleStep) {
        if self.best.is_none_or(|b| accuracy > b) {
            self.best = Some(accuracy);
            self.stale = 0;
            return (true, ScheduleStep::Continue);
        }
        self.stale += 1;
        self.lr /= 2.0;
        let step = if self.stale >= self.patience {
            ScheduleStep::Stop
        } else {
            ScheduleStep::Continue
        };
        (false, step)
    }
}

impl RnnModel {
    /// Per-token accuracy of argmax predictions.
    pub fn accuracy(&self, examples: &[Example<'_>]) -> Result<f64> {
        let mut total = 0usize;
        let mut correct = 0usize;
        for ex in examples {
            let acts = self.forward_pass(&ex.inputs, ex.pos.as_deref())?;
            for (a, &g) in acts.iter().zip(&ex.tags) {
                total += 1;
                correct += (argmax(&a.output) == g) as usize;
            }
        }
        Ok(if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        })
    }

    fn check_example(&self, ex: &Example<'_>) -> Result<()> {
        self.check_inputs(&ex.inputs, ex.pos.as_deref())?;
        if ex.tags.len() != ex.inputs.len() {
            return Err(Error::Consistency("tag count differs from token count".to_string()));
        }
        if let Some(&bad) = ex.tags.iter().find(|&&t| t >= self.n_tags()) {
            return Err(Error::Consistency(alloc::format!("tag index {} out of range", bad)));
        }
        Ok(())
    }
}

/// Trains `model` by per-sentence SGD over `train`, shuffled every epoch,
/// and returns the snapshot with the best validation accuracy together with
/// the epoch log.
pub fn train(mut model: RnnModel, train: &[Example<'_>], valid: &[Example<'_>]) -> Result<(RnnModel, Vec<EpochRecord>)> {
    let config = model.config().clone();
    if config.max_epochs == 0 {
        return Err(Error::Config("max_epochs must be at least 1".to_string()));
    }
    if train.is_empty() {
        return Err(Error::Training("empty training set".to_string()));
    }
    if valid.iter().all(|ex| ex.tags.is_empty()) {
        return Err(Error::Training("empty validation set".to_string()));
    }
    for ex in train.iter().chain(valid) {
        model.check_example(ex)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut schedule = LrSchedule::new(config.learning_rate);
    let mut best = model.clone();
    let mut log = Vec::new();

    for epoch in 1..=config.max_epochs {
        let lr = schedule.learning_rate();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let ex = &train[i];
            let (loss, grads) = model.gradients(&ex.inputs, ex.pos.as_deref(), &ex.tags)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, sentence: i });
            }
            epoch_loss += loss;
            grads.apply(model.weights_mut(), &ex.inputs, lr);
        }
        if !model.weights().is_finite() {
            return Err(Error::Divergence {
                epoch,
                sentence: *order.last().expect("nonempty"),
            });
        }
        let valid_accuracy = model.accuracy(valid)?;
        let (improved, step) = schedule.observe(valid_accuracy);
        if improved {
            best = model.clone();
        }
        log.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: epoch_loss,
            valid_accuracy,
            improved,
        });
        if step == ScheduleStep::Stop {
            break;
        }
    }
    Ok((best, log))
}
