//! Elman recurrent taggers over common word vectors.
//!
//! The simple network (SRNN) computes, for each token,
//!
//! ```text
//! f(t) = σ(w(t)·I_F + f(t−1)·R_F)
//! c(t) = σ(f(t)·H_F)
//! y(t) = softmax(c(t)·O)
//! ```
//!
//! with `f(−1) = 0`. The bidirectional network adds a backward layer
//! `b(t) = σ(w(t)·I_B + b(t+1)·R_B)` (with `b(T) = 0`) whose contribution is
//! summed into the compression pre-activation: `c(t) = σ(f(t)·H_F + b(t)·H_B)`.
//! POS-aware variants add `POS(t)·P` to the pre-activation of the input,
//! recurrent, or compression layer. There are no bias terms.

mod backprop;
mod forward;
mod gradcheck;
mod tagging;
mod train;

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::TagSet;
use crate::matrix::Matrix;
use crate::{Error, Result};

pub use backprop::Gradients;
pub use forward::LayerActivations;
pub use gradcheck::{gradient_check, GradientCheck};
pub use tagging::{tag_sentence, OovResolver, TaggedOutput};
pub use train::{train, EpochRecord, Example, LrSchedule, ScheduleStep};

/// Scale of the uniform weight initialisation.
pub const INIT_SCALE: f64 = 0.1;

/// Layer that receives the one-hot POS projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosInjection {
    None,
    /// Appended to the word input; in a bidirectional network the forward and
    /// backward layers each get their own projection, like `I_F` and `I_B`.
    Input,
    /// Added to the recurrent layer(s); a bidirectional network shares one
    /// projection between its forward and backward layers.
    Recurrent,
    /// Added to the compression layer.
    Compression,
}

impl PosInjection {
    pub fn code(self) -> u8 {
        match self {
            PosInjection::None => 0,
            PosInjection::Input => 1,
            PosInjection::Recurrent => 2,
            PosInjection::Compression => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => PosInjection::None,
            1 => PosInjection::Input,
            2 => PosInjection::Recurrent,
            3 => PosInjection::Compression,
            _ => return None,
        })
    }
}

/// How many steps back the recurrent error signal travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpttHorizon {
    Full,
    Truncated(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnConfig {
    pub forward_size: usize,
    pub compression_size: usize,
    pub bidirectional: bool,
    pub pos_injection: PosInjection,
    pub pos_tagset_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub bptt: BpttHorizon,
    pub seed: u64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            forward_size: 160,
            compression_size: 160,
            bidirectional: false,
            pos_injection: PosInjection::None,
            pos_tagset_size: 0,
            learning_rate: 0.1,
            max_epochs: 20,
            bptt: BpttHorizon::Full,
            seed: 1,
        }
    }
}

impl RnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.forward_size == 0 || self.compression_size == 0 {
            return Err(Error::Config("layer sizes must be at least 1".to_string()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".to_string()));
        }
        let wants_pos = self.pos_injection != PosInjection::None;
        if wants_pos != (self.pos_tagset_size > 0) {
            return Err(Error::Config(
                "pos_tagset_size must be positive exactly when POS injection is enabled".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardWeights {
    /// `I_B`, N × forward_size.
    pub input: Matrix,
    /// `R_B`, forward_size × forward_size.
    pub recurrent: Matrix,
    /// `H_B`, forward_size × compression_size.
    pub hidden: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosWeights {
    /// POS tagset size × size of the injected layer.
    pub forward: Matrix,
    /// Separate backward-layer projection (input-site injection in a
    /// bidirectional network only).
    pub backward: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `I_F`, N × forward_size.
    pub input_forward: Matrix,
    /// `R_F`, forward_size × forward_size.
    pub recurrent_forward: Matrix,
    /// `H_F`, forward_size × compression_size.
    pub hidden_forward: Matrix,
    /// `O`, compression_size × number of tags.
    pub output: Matrix,
    pub backward: Option<BackwardWeights>,
    pub pos: Option<PosWeights>,
}

impl Weights {
    /// Expected `(rows, cols)` of every matrix in [`Weights::matrices`] order.
    pub fn shapes(config: &RnnConfig, input_dim: usize, n_tags: usize) -> Vec<(usize, usize)> {
        let h = config.forward_size;
        let c = config.compression_size;
        let mut shapes = alloc::vec![(input_dim, h), (h, h), (h, c), (c, n_tags)];
        if config.bidirectional {
            shapes.extend([(input_dim, h), (h, h), (h, c)]);
        }
        let p = config.pos_tagset_size;
        match config.pos_injection {
            PosInjection::None => {}
            PosInjection::Input => {
                shapes.push((p, h));
                if config.bidirectional {
                    shapes.push((p, h));
                }
            }
            PosInjection::Recurrent => shapes.push((p, h)),
            PosInjection::Compression => shapes.push((p, c)),
        }
        shapes
    }

    /// Builds weights from matrices in [`Weights::matrices`] order.
    pub fn from_matrices(config: &RnnConfig, mut mats: Vec<Matrix>) -> Result<Self> {
        let has_backward_pos = config.bidirectional && config.pos_injection == PosInjection::Input;
        let expected = 4
            + if config.bidirectional { 3 } else { 0 }
            + if config.pos_injection != PosInjection::None { 1 } else { 0 }
            + has_backward_pos as usize;
        if mats.len() != expected {
            return Err(Error::Shape(alloc::format!(
                "expected {} weight matrices, got {}",
                expected,
                mats.len()
            )));
        }
        let mut it = mats.drain(..);
        let mut next = || it.next().expect("length checked");
        let input_forward = next();
        let recurrent_forward = next();
        let hidden_forward = next();
        let output = next();
        let backward = config.bidirectional.then(|| BackwardWeights {
            input: next(),
            recurrent: next(),
            hidden: next(),
        });
        let pos = (config.pos_injection != PosInjection::None).then(|| PosWeights {
            forward: next(),
            backward: has_backward_pos.then(&mut next),
        });
        Ok(Weights {
            input_forward,
            recurrent_forward,
            hidden_forward,
            output,
            backward,
            pos,
        })
    }

    /// All matrices in a fixed order: `I_F, R_F, H_F, O, [I_B, R_B, H_B], [P_F, [P_B]]`.
    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut out = alloc::vec![
            &self.input_forward,
            &self.recurrent_forward,
            &self.hidden_forward,
            &self.output
        ];
        if let Some(b) = &self.backward {
            out.extend([&b.input, &b.recurrent, &b.hidden]);
        }
        if let Some(p) = &self.pos {
            out.push(&p.forward);
            if let Some(pb) = &p.backward {
                out.push(pb);
            }
        }
        out
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = alloc::vec![
            &mut self.input_forward,
            &mut self.recurrent_forward,
            &mut self.hidden_forward,
            &mut self.output
        ];
        if let Some(b) = &mut self.backward {
            out.extend([&mut b.input, &mut b.recurrent, &mut b.hidden]);
        }
        if let Some(p) = &mut self.pos {
            out.push(&mut p.forward);
            if let Some(pb) = &mut p.backward {
                out.push(pb);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }
}

/// A trained (or freshly initialised) tagger with its tag inventories.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    config: RnnConfig,
    input_dim: usize,
    tagset: TagSet,
    pos_tagset: Option<TagSet>,
    weights: Weights,
}

impl RnnModel {
    /// Initialises every weight uniformly in `[-0.1, 0.1]` from `config.seed`.
    pub fn new(config: RnnConfig, input_dim: usize, tagset: TagSet, pos_tagset: Option<TagSet>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::with_init(config, input_dim, tagset, pos_tagset, |rows, cols| {
            Matrix::uniform(rows, cols, INIT_SCALE, &mut rng)
        })
    }

    pub fn with_init(
        config: RnnConfig,
        input_dim: usize,
        tagset: TagSet,
        pos_tagset: Option<TagSet>,
        mut init: impl FnMut(usize, usize) -> Matrix,
    ) -> Result<Self> {
        let mats = Weights::shapes(&config, input_dim, tagset.len())
            .into_iter()
            .map(|(r, c)| init(r, c))
            .collect();
        let weights = Weights::from_matrices(&config, mats)?;
        Self::from_parts(config, input_dim, tagset, pos_tagset, weights)
    }

    pub fn from_parts(
        config: RnnConfig,
        input_dim: usize,
        tagset: TagSet,
        pos_tagset: Option<TagSet>,
        weights: Weights,
    ) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Shape("input dimension must be positive".to_string()));
        }
        match &pos_tagset {
            Some(p) if p.len() != config.pos_tagset_size => {
                return Err(Error::Shape(alloc::format!(
                    "POS tagset has {} labels but the configuration expects {}",
                    p.len(),
                    config.pos_tagset_size
                )))
            }
            None if config.pos_tagset_size > 0 => {
                return Err(Error::Config("POS injection needs a POS tagset".to_string()))
            }
            _ => {}
        }
        let shapes = Weights::shapes(&config, input_dim, tagset.len());
        let actual: Vec<(usize, usize)> = weights.matrices().iter().map(|m| (m.rows(), m.cols())).collect();
        if shapes != actual {
            return Err(Error::Shape(alloc::format!(
                "weight shapes {:?} do not match the configuration {:?}",
                actual,
                shapes
            )));
        }
        if !weights.is_finite() {
            return Err(Error::Shape("non-finite weight".to_string()));
        }
        Ok(RnnModel {
            config,
            input_dim,
            tagset,
            pos_tagset,
            weights,
        })
    }

    pub fn config(&self) -> &RnnConfig {
        &self.config
    }

    /// Number of bi-sentences `N` the model reads.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn pos_tagset(&self) -> Option<&TagSet> {
        self.pos_tagset.as_ref()
    }

    pub fn n_tags(&self) -> usize {
        self.tagset.len()
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Weights {
        &mut self.weights
    }

    pub fn uses_pos(&self) -> bool {
        self.config.pos_injection != PosInjection::None
    }
}
