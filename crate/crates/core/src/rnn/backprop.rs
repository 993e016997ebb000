//! Backpropagation through time.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{BpttHorizon, LayerActivations, PosInjection, RnnModel, Weights};
use crate::math::ln;
use crate::matrix::{axpy, Matrix};
use crate::repr::CommonWordVector;
use crate::{Error, Result};

/// Loss gradient for one sentence.
///
/// The input matrices `I_F`/`I_B` are only touched on the rows selected by
/// each token's vector, so their gradient is kept as one pre-activation
/// delta per time step: row `i` receives the sum of the deltas of every step
/// whose word occurs in bi-sentence `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub forward_deltas: Vec<Vec<f64>>,
    pub backward_deltas: Option<Vec<Vec<f64>>>,
    pub recurrent_forward: Matrix,
    pub hidden_forward: Matrix,
    pub output: Matrix,
    pub recurrent_backward: Option<Matrix>,
    pub hidden_backward: Option<Matrix>,
    pub pos_forward: Option<Matrix>,
    pub pos_backward: Option<Matrix>,
}

impl Gradients {
    fn zeros(model: &RnnModel, len: usize) -> Self {
        let w = &model.weights;
        let h = model.config.forward_size;
        let like = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Gradients {
            forward_deltas: vec![vec![0.0; h]; len],
            backward_deltas: w.backward.as_ref().map(|_| vec![vec![0.0; h]; len]),
            recurrent_forward: like(&w.recurrent_forward),
            hidden_forward: like(&w.hidden_forward),
            output: like(&w.output),
            recurrent_backward: w.backward.as_ref().map(|b| like(&b.recurrent)),
            hidden_backward: w.backward.as_ref().map(|b| like(&b.hidden)),
            pos_forward: w.pos.as_ref().map(|p| like(&p.forward)),
            pos_backward: w.pos.as_ref().and_then(|p| p.backward.as_ref()).map(like),
        }
    }

    /// Dense gradient matrices in [`Weights::matrices`] order.
    pub fn to_dense(&self, model: &RnnModel, sentence: &[&CommonWordVector]) -> Vec<Matrix> {
        let n = model.input_dim();
        let h = model.config.forward_size;
        let scatter = |deltas: &[Vec<f64>]| {
            let mut m = Matrix::zeros(n, h);
            for (v, d) in sentence.iter().zip(deltas) {
                for &i in v.indices() {
                    axpy(1.0, d, m.row_mut(i as usize));
                }
            }
            m
        };
        let mut out = vec![
            scatter(&self.forward_deltas),
            self.recurrent_forward.clone(),
            self.hidden_forward.clone(),
            self.output.clone(),
        ];
        if let Some(bd) = &self.backward_deltas {
            out.push(scatter(bd));
            out.push(self.recurrent_backward.clone().expect("bidirectional"));
            out.push(self.hidden_backward.clone().expect("bidirectional"));
        }
        if let Some(p) = &self.pos_forward {
            out.push(p.clone());
        }
        if let Some(p) = &self.pos_backward {
            out.push(p.clone());
        }
        out
    }

    /// Plain SGD step: `weights -= lr * gradient`.
    pub fn apply(&self, weights: &mut Weights, sentence: &[&CommonWordVector], lr: f64) {
        for (v, d) in sentence.iter().zip(&self.forward_deltas) {
            for &i in v.indices() {
                axpy(-lr, d, weights.input_forward.row_mut(i as usize));
            }
        }
        weights.recurrent_forward.add_scaled(-lr, &self.recurrent_forward);
        weights.hidden_forward.add_scaled(-lr, &self.hidden_forward);
        weights.output.add_scaled(-lr, &self.output);
        if let (Some(bw), Some(bd)) = (&mut weights.backward, &self.backward_deltas) {
            for (v, d) in sentence.iter().zip(bd) {
                for &i in v.indices() {
                    axpy(-lr, d, bw.input.row_mut(i as usize));
                }
            }
            bw.recurrent
                .add_scaled(-lr, self.recurrent_backward.as_ref().expect("bidirectional"));
            bw.hidden
                .add_scaled(-lr, self.hidden_backward.as_ref().expect("bidirectional"));
        }
        if let Some(p) = &mut weights.pos {
            p.forward
                .add_scaled(-lr, self.pos_forward.as_ref().expect("POS model"));
            if let (Some(pb), Some(g)) = (&mut p.backward, &self.pos_backward) {
                pb.add_scaled(-lr, g);
            }
        }
    }
}

fn sigmoid_grad(d: &[f64], act: &[f64]) -> Vec<f64> {
    d.iter().zip(act).map(|(g, a)| g * a * (1.0 - a)).collect()
}

impl RnnModel {
    /// Cross-entropy loss of `gold` and its exact gradient (up to the
    /// configured BPTT horizon).
    pub fn gradients(
        &self,
        sentence: &[&CommonWordVector],
        pos: Option<&[usize]>,
        gold: &[usize],
    ) -> Result<(f64, Gradients)> {
        self.check_inputs(sentence, pos)?;
        if gold.len() != sentence.len() {
            return Err(Error::Consistency("tag count differs from token count".to_string()));
        }
        if let Some(&bad) = gold.iter().find(|&&g| g >= self.n_tags()) {
            return Err(Error::Consistency(alloc::format!("tag index {} out of range", bad)));
        }
        let acts = self.forward_unchecked(sentence, pos);
        Ok(self.backward_pass(&acts, pos, gold))
    }

    fn backward_pass(&self, acts: &[LayerActivations], pos: Option<&[usize]>, gold: &[usize]) -> (f64, Gradients) {
        let w = &self.weights;
        let n = acts.len();
        let site = self.config.pos_injection;
        let mut g = Gradients::zeros(self, n);
        let mut loss = 0.0;

        // Output and compression layers; error signals reaching f(t) and b(t).
        let mut df_direct = Vec::with_capacity(n);
        let mut db_direct = Vec::with_capacity(n);
        for (t, a) in acts.iter().enumerate() {
            loss -= ln(a.output[gold[t]]);
            let mut dz = a.output.clone();
            dz[gold[t]] -= 1.0;
            g.output.add_outer(&a.compression, &dz);
            let mut dc = vec![0.0; self.config.compression_size];
            w.output.accumulate_mul_vec(&dz, &mut dc);
            let dac = sigmoid_grad(&dc, &a.compression);

            g.hidden_forward.add_outer(&a.forward, &dac);
            let mut df = vec![0.0; self.config.forward_size];
            w.hidden_forward.accumulate_mul_vec(&dac, &mut df);
            df_direct.push(df);

            if let (Some(bw), Some(bv)) = (&w.backward, &a.backward) {
                g.hidden_backward.as_mut().expect("bidirectional").add_outer(bv, &dac);
                let mut db = vec![0.0; self.config.forward_size];
                bw.hidden.accumulate_mul_vec(&dac, &mut db);
                db_direct.push(db);
            }
            if site == PosInjection::Compression {
                let p = pos.expect("validated")[t];
                axpy(1.0, &dac, g.pos_forward.as_mut().expect("POS model").row_mut(p));
            }
        }

        let horizon = match self.config.bptt {
            BpttHorizon::Full => None,
            BpttHorizon::Truncated(k) => Some(k),
        };

        // Forward layer, error flowing back in time.
        let forward_acts: Vec<&[f64]> = acts.iter().map(|a| a.forward.as_slice()).collect();
        let forward_deltas = through_time(
            &forward_acts,
            &df_direct,
            &w.recurrent_forward,
            horizon,
            Direction::Forward,
            &mut g.recurrent_forward,
        );
        if matches!(site, PosInjection::Input | PosInjection::Recurrent) {
            let pg = g.pos_forward.as_mut().expect("POS model");
            for (t, d) in forward_deltas.iter().enumerate() {
                axpy(1.0, d, pg.row_mut(pos.expect("validated")[t]));
            }
        }
        g.forward_deltas = forward_deltas;

        // Backward layer, error flowing forward in time.
        if let Some(bw) = &w.backward {
            let backward_acts: Vec<&[f64]> = acts
                .iter()
                .map(|a| a.backward.as_deref().expect("bidirectional"))
                .collect();
            let deltas = through_time(
                &backward_acts,
                &db_direct,
                &bw.recurrent,
                horizon,
                Direction::Backward,
                g.recurrent_backward.as_mut().expect("bidirectional"),
            );
            match site {
                PosInjection::Input => {
                    let pg = g.pos_backward.as_mut().expect("input-site BRNN");
                    for (t, d) in deltas.iter().enumerate() {
                        axpy(1.0, d, pg.row_mut(pos.expect("validated")[t]));
                    }
                }
                PosInjection::Recurrent => {
                    let pg = g.pos_forward.as_mut().expect("POS model");
                    for (t, d) in deltas.iter().enumerate() {
                        axpy(1.0, d, pg.row_mut(pos.expect("validated")[t]));
                    }
                }
                _ => {}
            }
            g.backward_deltas = Some(deltas);
        }
        (loss, g)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// State `t` depends on state `t - 1`.
    Forward,
    /// State `t` depends on state `t + 1`.
    Backward,
}

/// Propagates the direct error signals `direct[t]` (w.r.t. the layer output
/// at `t`) through the recurrence, returning the pre-activation delta at
/// every step and accumulating the recurrent weight gradient.
fn through_time(
    acts: &[&[f64]],
    direct: &[Vec<f64>],
    recurrent: &Matrix,
    horizon: Option<usize>,
    dir: Direction,
    recurrent_grad: &mut Matrix,
) -> Vec<Vec<f64>> {
    let n = acts.len();
    let h = recurrent.rows();
    let mut deltas = vec![vec![0.0; h]; n];
    // Order in which the recurrence is unrolled backwards, and each step's
    // predecessor state.
    let order: Vec<usize> = match dir {
        Direction::Forward => (0..n).rev().collect(),
        Direction::Backward => (0..n).collect(),
    };
    let predecessor = |t: usize| -> Option<usize> {
        match dir {
            Direction::Forward => t.checked_sub(1),
            Direction::Backward => (t + 1 < n).then_some(t + 1),
        }
    };

    match horizon {
        None => {
            let mut carry = vec![0.0; h];
            for &t in &order {
                let mut d = direct[t].clone();
                axpy(1.0, &carry, &mut d);
                let da = sigmoid_grad(&d, acts[t]);
                carry.iter_mut().for_each(|c| *c = 0.0);
                if let Some(p) = predecessor(t) {
                    recurrent_grad.add_outer(acts[p], &da);
                    recurrent.accumulate_mul_vec(&da, &mut carry);
                }
                deltas[t] = da;
            }
        }
        Some(k) => {
            for &start in &order {
                let mut d = direct[start].clone();
                let mut t = start;
                let mut steps = 0;
                loop {
                    let da = sigmoid_grad(&d, acts[t]);
                    axpy(1.0, &da, &mut deltas[t]);
                    let Some(p) = predecessor(t) else { break };
                    if steps == k {
                        break;
                    }
                    recurrent_grad.add_outer(acts[p], &da);
                    let mut next = vec![0.0; h];
                    recurrent.accumulate_mul_vec(&da, &mut next);
                    d = next;
                    t = p;
                    steps += 1;
                }
            }
        }
    }
    deltas
}
