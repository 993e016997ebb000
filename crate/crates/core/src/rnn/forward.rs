use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{PosInjection, RnnModel};
use crate::math::{sigmoid, softmax};
use crate::matrix::{axpy, Matrix};
use crate::repr::CommonWordVector;
use crate::{Error, Result};

/// Layer outputs at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub forward: Vec<f64>,
    pub backward: Option<Vec<f64>>,
    pub compression: Vec<f64>,
    pub output: Vec<f64>,
}

fn sum_rows(m: &Matrix, indices: &[u32], out: &mut [f64]) {
    for &i in indices {
        axpy(1.0, m.row(i as usize), out);
    }
}

fn squash(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = sigmoid(*x));
}

impl RnnModel {
    pub(crate) fn check_inputs(&self, sentence: &[&CommonWordVector], pos: Option<&[usize]>) -> Result<()> {
        for (t, v) in sentence.iter().enumerate() {
            if v.dim() != self.input_dim {
                return Err(Error::Shape(alloc::format!(
                    "token {} has a vector of dimension {}, model expects {}",
                    t,
                    v.dim(),
                    self.input_dim
                )));
            }
        }
        match (self.uses_pos(), pos) {
            (false, Some(_)) => Err(Error::Consistency(
                "POS stream given to a model without POS injection".to_string(),
            )),
            (true, None) => Err(Error::Consistency(
                "model with POS injection needs a POS stream".to_string(),
            )),
            (true, Some(p)) => {
                if p.len() != sentence.len() {
                    return Err(Error::Consistency(alloc::format!(
                        "{} tokens but {} POS tags",
                        sentence.len(),
                        p.len()
                    )));
                }
                if let Some(&bad) = p.iter().find(|&&t| t >= self.config.pos_tagset_size) {
                    return Err(Error::Consistency(alloc::format!(
                        "POS index {} out of range for {} POS tags",
                        bad,
                        self.config.pos_tagset_size
                    )));
                }
                Ok(())
            }
            (false, None) => Ok(()),
        }
    }

    /// Runs the network over one sentence.
    pub fn forward_pass(
        &self,
        sentence: &[&CommonWordVector],
        pos: Option<&[usize]>,
    ) -> Result<Vec<LayerActivations>> {
        self.check_inputs(sentence, pos)?;
        Ok(self.forward_unchecked(sentence, pos))
    }

    pub(crate) fn forward_unchecked(
        &self,
        sentence: &[&CommonWordVector],
        pos: Option<&[usize]>,
    ) -> Vec<LayerActivations> {
        let w = &self.weights;
        let h = self.config.forward_size;
        let c_size = self.config.compression_size;
        let n = sentence.len();
        let site = self.config.pos_injection;

        let mut forward: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (t, v) in sentence.iter().enumerate() {
            let mut a = vec![0.0; h];
            sum_rows(&w.input_forward, v.indices(), &mut a);
            if t > 0 {
                w.recurrent_forward.accumulate_vec_mul(&forward[t - 1], &mut a);
            }
            if matches!(site, PosInjection::Input | PosInjection::Recurrent) {
                let p = w.pos.as_ref().expect("validated");
                axpy(1.0, p.forward.row(pos.expect("validated")[t]), &mut a);
            }
            squash(&mut a);
            forward.push(a);
        }

        let backward = w.backward.as_ref().map(|bw| {
            let mut layer = vec![Vec::new(); n];
            for t in (0..n).rev() {
                let mut a = vec![0.0; h];
                sum_rows(&bw.input, sentence[t].indices(), &mut a);
                if t + 1 < n {
                    bw.recurrent.accumulate_vec_mul(&layer[t + 1], &mut a);
                }
                if let Some(p) = &w.pos {
                    let tag = pos.expect("validated")[t];
                    match site {
                        PosInjection::Input => {
                            axpy(1.0, p.backward.as_ref().expect("validated").row(tag), &mut a)
                        }
                        PosInjection::Recurrent => axpy(1.0, p.forward.row(tag), &mut a),
                        _ => {}
                    }
                }
                squash(&mut a);
                layer[t] = a;
            }
            layer
        });

        let mut out = Vec::with_capacity(n);
        for (t, f) in forward.into_iter().enumerate() {
            let mut a = vec![0.0; c_size];
            w.hidden_forward.accumulate_vec_mul(&f, &mut a);
            let b = backward.as_ref().map(|layer| layer[t].clone());
            if let (Some(bw), Some(bv)) = (&w.backward, &b) {
                bw.hidden.accumulate_vec_mul(bv, &mut a);
            }
            if site == PosInjection::Compression {
                let p = w.pos.as_ref().expect("validated");
                axpy(1.0, p.forward.row(pos.expect("validated")[t]), &mut a);
            }
            squash(&mut a);
            let mut z = vec![0.0; self.n_tags()];
            w.output.accumulate_vec_mul(&a, &mut z);
            let mut y = vec![0.0; self.n_tags()];
            softmax(&z, &mut y);
            out.push(LayerActivations {
                forward: f,
                backward: b,
                compression: a,
                output: y,
            });
        }
        out
    }

    /// Sum of per-token cross-entropy against `gold`.
    pub fn loss(&self, sentence: &[&CommonWordVector], pos: Option<&[usize]>, gold: &[usize]) -> Result<f64> {
        if gold.len() != sentence.len() {
            return Err(Error::Consistency("tag count differs from token count".to_string()));
        }
        let acts = self.forward_pass(sentence, pos)?;
        Ok(acts
            .iter()
            .zip(gold)
            .map(|(a, &g)| -crate::math::ln(a.output[g]))
            .sum())
    }
}
