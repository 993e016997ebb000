//! Cross-lingual sequence tagging without word alignment.
//!
//! Every word of every language in a sentence-aligned parallel corpus is
//! represented by the set of bi-sentences it occurs in. A recurrent tagger
//! trained on annotated source sentences can then tag any language indexed
//! in the same table. The crate also carries the alignment-projection
//! baseline (IBM Model 1 + trigram HMM), a CBOW model used to stand in for
//! out-of-vocabulary words, and the linear interpolation combiner.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod align;
pub mod cbow;
pub mod combine;
pub mod corpus;
pub mod error;
pub mod hmm;
pub mod matrix;
pub mod repr;
pub mod rnn;

mod math;

pub use math::argmax;

pub use error::{Error, Result};
