use alloc::string::String;
use alloc::vec::Vec;

use super::RnnModel;
use crate::cbow::{context_window, resolve_oov, CbowModel};
use crate::combine::TagDistribution;
use crate::corpus::Side;
use crate::repr::{CommonWordVector, ReprTable};
use crate::Result;

/// CBOW-based replacement of out-of-vocabulary tokens. The context window
/// is the CBOW model's own window.
#[derive(Debug, Clone, Copy)]
pub struct OovResolver<'a> {
    pub cbow: &'a CbowModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedOutput {
    pub tags: Vec<usize>,
    pub distributions: Vec<TagDistribution>,
    /// For each token replaced by OOV resolution, the word used instead.
    pub replacements: Vec<Option<String>>,
}

/// Tags `tokens` of language `side`: each token is looked up in `repr`
/// (optionally after OOV resolution), the network is run, and the most
/// probable tag is chosen (lowest index on ties).
pub fn tag_sentence(
    model: &RnnModel,
    repr: &ReprTable,
    tokens: &[String],
    side: Side,
    pos: Option<&[usize]>,
    oov: Option<OovResolver<'_>>,
) -> Result<TaggedOutput> {
    let mut inputs: Vec<&CommonWordVector> = Vec::with_capacity(tokens.len());
    let mut replacements = Vec::with_capacity(tokens.len());
    for (i, token) in tokens.iter().enumerate() {
        let mut vector = repr.vector(side, token);
        let mut replacement = None;
        if vector.is_empty() {
            if let Some(OovResolver { cbow }) = oov {
                let context: Vec<&str> = context_window(tokens, i, cbow.window()).collect();
                let resolved = resolve_oov(token, &context, cbow, repr, side);
                if resolved != token {
                    vector = repr.vector(side, resolved);
                    replacement = Some(String::from(resolved));
                }
            }
        }
        inputs.push(vector);
        replacements.push(replacement);
    }
    let acts = model.forward_pass(&inputs, pos)?;
    let distributions: Vec<TagDistribution> = acts
        .into_iter()
        .map(|a| TagDistribution::from_raw(a.output))
        .collect();
    Ok(TaggedOutput {
        tags: distributions.iter().map(TagDistribution::argmax).collect(),
        distributions,
        replacements,
    })
}
