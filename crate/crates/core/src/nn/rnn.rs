use serde::{Deserialize, Serialize};

use super::dense::{dense_backward, dense_forward};
use super::loss::{cross_entropy, dropout_mask, relu_in_place, softmax, softmax_ce_grad};
use super::lstm::{lstm_backward, lstm_forward, LstmCache, LstmGrads, LstmParams, Packing};
use super::{NnError, ParameterSet, Tensor};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub head_hidden: usize,
    pub classes: usize,
    /// Dropout probability in percent, so the config stays `Eq`.
    pub dropout_pct: u8,
}

impl Default for RnnConfig {
    /// Two stacked LSTMs of 100 units, a 40-unit head, 37 classes.
    fn default() -> Self {
        RnnConfig { input: 3, hidden: 100, layers: 2, head_hidden: 40, classes: 37, dropout_pct: 50 }
    }
}

impl RnnConfig {
    fn dropout(&self) -> f64 {
        f64::from(self.dropout_pct) / 100.0
    }
}

/// One training example: a `[len × input]` row-major sequence and its label.
#[derive(Clone, Copy, Debug)]
pub struct SequenceExample<'a> {
    pub features: &'a [f64],
    pub label: usize,
    pub dropout_seed: u64,
}

/// Stacked LSTM with a per-timestep classification head
/// `dense → ReLU → dropout → dense → softmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnModel {
    pub config: RnnConfig,
    pub params: ParameterSet,
}

impl RnnModel {
    pub fn new(config: RnnConfig, init_range: f64, seed: u64) -> Self {
        let mut r = rng::stream(seed);
        let mut params = ParameterSet::new();
        let (h, g4) = (config.hidden, 4 * config.hidden);
        for l in 0..config.layers {
            let inp = if l == 0 { config.input } else { h };
            params.push(&format!("lstm{l}.w_ih"), Tensor::uniform(&[g4, inp], init_range, &mut r));
            params.push(&format!("lstm{l}.w_hh"), Tensor::uniform(&[g4, h], init_range, &mut r));
            params.push(&format!("lstm{l}.b"), Tensor::uniform(&[g4], init_range, &mut r));
        }
        params.push("head.w1", Tensor::uniform(&[config.head_hidden, h], init_range, &mut r));
        params.push("head.b1", Tensor::uniform(&[config.head_hidden], init_range, &mut r));
        params.push("head.w2", Tensor::uniform(&[config.classes, config.head_hidden], init_range, &mut r));
        params.push("head.b2", Tensor::uniform(&[config.classes], init_range, &mut r));
        RnnModel { config, params }
    }

    pub fn from_params(config: RnnConfig, params: ParameterSet) -> Result<Self, NnError> {
        let want = RnnModel::new(config, 0.0, 0).params;
        if !want.same_layout(&params) {
            return Err(NnError::Shape("parameters do not match the RNN configuration".into()));
        }
        Ok(RnnModel { config, params })
    }

    fn layer(&self, l: usize) -> LstmParams<'_> {
        LstmParams { w_ih: &self.params[3 * l], w_hh: &self.params[3 * l + 1], b: &self.params[3 * l + 2] }
    }

    fn head_index(&self) -> usize {
        3 * self.config.layers
    }

    fn check_features(&self, features: &[f64]) -> Result<usize, NnError> {
        let w = self.config.input;
        if features.is_empty() || features.len() % w != 0 {
            return Err(NnError::Shape(format!("{} feature values is not a positive multiple of {w}", features.len())));
        }
        Ok(features.len() / w)
    }

    fn stack_forward(&self, x: &[f64], pack: &Packing) -> Result<Vec<LstmCache>, NnError> {
        let mut caches: Vec<LstmCache> = Vec::with_capacity(self.config.layers);
        for l in 0..self.config.layers {
            let input = if l == 0 { x } else { &caches[l - 1].h };
            let cache = lstm_forward(&self.layer(l), input, pack)?;
            caches.push(cache);
        }
        Ok(caches)
    }

    /// Top-layer hidden states, `[len × hidden]`.
    pub fn hidden_states(&self, features: &[f64]) -> Result<Vec<f64>, NnError> {
        let len = self.check_features(features)?;
        let mut caches = self.stack_forward(features, &Packing::single(len)?)?;
        Ok(caches.pop().map(|c| c.h).unwrap_or_default())
    }

    /// Head on a single hidden vector. `dropout_seed = None` is eval mode.
    pub fn head_forward(&self, h: &[f64], dropout_seed: Option<u64>) -> Vec<f64> {
        let k = self.head_index();
        let mut z1 = dense_forward(&self.params[k], &self.params[k + 1], h, 1);
        relu_in_place(&mut z1);
        if let Some(seed) = dropout_seed {
            for (a, m) in z1.iter_mut().zip(dropout_mask(seed, self.config.head_hidden, self.config.dropout())) {
                *a *= m;
            }
        }
        softmax(&dense_forward(&self.params[k + 2], &self.params[k + 3], &z1, 1))
    }

    /// Class probabilities after every timestep (eval mode).
    pub fn timeline(&self, features: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        let h = self.hidden_states(features)?;
        Ok(h.chunks(self.config.hidden).map(|row| self.head_forward(row, None)).collect())
    }

    /// Class probabilities after the last timestep (eval mode).
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>, NnError> {
        let h = self.hidden_states(features)?;
        Ok(self.head_forward(&h[h.len() - self.config.hidden..], None))
    }

    /// Mean cross-entropy of the final-step prediction over `batch` and its
    /// gradient. Dropout masks come from each example's seed.
    pub fn loss_and_grad(&self, batch: &[SequenceExample]) -> Result<(f64, ParameterSet), NnError> {
        let (hd, hh, classes) = (self.config.hidden, self.config.head_hidden, self.config.classes);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut lens = Vec::with_capacity(batch.len());
        for ex in batch {
            lens.push(self.check_features(ex.features)?);
        }
        order.sort_by(|&a, &b| lens[b].cmp(&lens[a]).then(a.cmp(&b)));
        let sorted_lens: Vec<usize> = order.iter().map(|&i| lens[i]).collect();
        let pack = Packing::new(&sorted_lens)?;
        let seqs: Vec<&[f64]> = order.iter().map(|&i| batch[i].features).collect();
        let x = pack.pack(&seqs, self.config.input);
        let caches = self.stack_forward(&x, &pack)?;
        let top = &caches[caches.len() - 1].h;

        let n = batch.len();
        let mut last = vec![0.0; n * hd];
        for b in 0..n {
            let r = pack.last_row(b);
            last[b * hd..(b + 1) * hd].copy_from_slice(&top[r * hd..(r + 1) * hd]);
        }
        let k = self.head_index();
        let z1 = dense_forward(&self.params[k], &self.params[k + 1], &last, n);
        let mut masks = Vec::with_capacity(n * hh);
        for &i in &order {
            masks.extend(dropout_mask(batch[i].dropout_seed, hh, self.config.dropout()));
        }
        let a1: Vec<f64> = z1.iter().zip(&masks).map(|(z, m)| z.max(0.0) * m).collect();
        let logits = dense_forward(&self.params[k + 2], &self.params[k + 3], &a1, n);

        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        let mut dlogits = vec![0.0; n * classes];
        for (b, &i) in order.iter().enumerate() {
            let p = softmax(&logits[b * classes..(b + 1) * classes]);
            loss += cross_entropy(&p, batch[i].label);
            softmax_ce_grad(&p, batch[i].label, 1.0 / n as f64, &mut dlogits[b * classes..(b + 1) * classes]);
        }
        loss /= n as f64;

        let (g_lo, g_hi) = grads.tensors_mut().split_at_mut(k + 2);
        let (gw2, gb2) = g_hi.split_at_mut(1);
        let da1 = dense_backward(&self.params[k + 2], &a1, &dlogits, n, &mut gw2[0], &mut gb2[0]);
        let dz1: Vec<f64> = da1.iter().zip(&masks).zip(&z1).map(|((d, m), z)| if *z > 0.0 { d * m } else { 0.0 }).collect();
        let (gw1, gb1) = g_lo[k..].split_at_mut(1);
        let dlast = dense_backward(&self.params[k], &last, &dz1, n, &mut gw1[0], &mut gb1[0]);

        let mut dh = vec![0.0; pack.total_rows() * hd];
        for b in 0..n {
            let r = pack.last_row(b);
            dh[r * hd..(r + 1) * hd].copy_from_slice(&dlast[b * hd..(b + 1) * hd]);
        }
        for l in (0..self.config.layers).rev() {
            let input = if l == 0 { &x } else { &caches[l - 1].h };
            let (_, rest) = grads.tensors_mut().split_at_mut(3 * l);
            let (w_ih, rest) = rest.split_first_mut().expect("layer tensors");
            let (w_hh, rest) = rest.split_first_mut().expect("layer tensors");
            let b = &mut rest[0];
            dh = lstm_backward(&self.layer(l), input, &pack, &caches[l], &dh, LstmGrads { w_ih, w_hh, b });
        }
        Ok((loss, grads))
    }
}
