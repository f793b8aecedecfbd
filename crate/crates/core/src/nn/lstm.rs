//! LSTM layer over packed variable-length batches.
//!
//! Sequences are sorted longest first and stored time-major: step `t` holds
//! one row for each sequence still running, in the same order at every step,
//! so the rows active at `t` are a prefix of the rows active at `t - 1`.
//! Gate blocks are ordered input, forget, cell candidate, output.

use super::linalg::{gemm, sigmoid};
use super::{NnError, Tensor};

/// Time-major layout of a batch of sequences sorted by decreasing length.
#[derive(Clone, Debug, PartialEq)]
pub struct Packing {
    lengths: Vec<usize>,
    batch_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Packing {
    pub fn new(lengths: &[usize]) -> Result<Self, NnError> {
        if lengths.is_empty() || lengths.contains(&0) || lengths.windows(2).any(|w| w[0] < w[1]) {
            return Err(NnError::Shape(format!("lengths must be positive and non-increasing: {lengths:?}")));
        }
        let steps = lengths[0];
        let batch_sizes: Vec<usize> = (0..steps).map(|t| lengths.iter().filter(|&&l| l > t).count()).collect();
        let mut offsets = Vec::with_capacity(steps);
        let mut acc = 0;
        for &n in &batch_sizes {
            offsets.push(acc);
            acc += n;
        }
        Ok(Packing { lengths: lengths.to_vec(), batch_sizes, offsets })
    }

    pub fn single(len: usize) -> Result<Self, NnError> {
        Self::new(&[len])
    }

    pub fn steps(&self) -> usize {
        self.batch_sizes.len()
    }

    pub fn total_rows(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// Packed row of sequence `b` at step `t`.
    pub fn row(&self, t: usize, b: usize) -> usize {
        debug_assert!(b < self.batch_sizes[t]);
        self.offsets[t] + b
    }

    /// Packed row holding the last step of sequence `b`.
    pub fn last_row(&self, b: usize) -> usize {
        self.row(self.lengths[b] - 1, b)
    }

    /// Copies per-sequence row-major `[len × width]` blocks into packed order.
    pub fn pack(&self, seqs: &[&[f64]], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.total_rows() * width];
        for (b, seq) in seqs.iter().enumerate() {
            for t in 0..self.lengths[b] {
                let r = self.row(t, b);
                out[r * width..(r + 1) * width].copy_from_slice(&seq[t * width..(t + 1) * width]);
            }
        }
        out
    }
}

/// Forward activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmCache {
    /// Hidden states, `[rows × H]` packed.
    pub h: Vec<f64>,
    c: Vec<f64>,
    /// Activated gates, `[rows × 4H]`.
    gates: Vec<f64>,
}

pub struct LstmParams<'a> {
    pub w_ih: &'a Tensor,
    pub w_hh: &'a Tensor,
    pub b: &'a Tensor,
}

impl LstmParams<'_> {
    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    pub fn input(&self) -> usize {
        self.w_ih.shape()[1]
    }

    fn check(&self, x_len: usize, pack: &Packing) -> Result<(), NnError> {
        let h = self.w_hh.shape()[1];
        let ok = self.w_hh.shape() == [4 * h, h]
            && self.w_ih.shape().len() == 2
            && self.w_ih.shape()[0] == 4 * h
            && self.b.shape() == [4 * h]
            && x_len == pack.total_rows() * self.input();
        if ok {
            Ok(())
        } else {
            Err(NnError::Shape(format!(
                "lstm weights {:?}/{:?}/{:?} with {} input values for {} rows",
                self.w_ih.shape(),
                self.w_hh.shape(),
                self.b.shape(),
                x_len,
                pack.total_rows()
            )))
        }
    }
}

pub fn lstm_forward(p: &LstmParams, x: &[f64], pack: &Packing) -> Result<LstmCache, NnError> {
    p.check(x.len(), pack)?;
    let (hd, inp, rows) = (p.hidden(), p.input(), pack.total_rows());
    let g4 = 4 * hd;
    let mut gates = vec![0.0; rows * g4];
    for r in 0..rows {
        gates[r * g4..(r + 1) * g4].copy_from_slice(p.b.data());
    }
    gemm(rows, inp, g4, 1.0, x, false, p.w_ih.data(), true, 1.0, &mut gates);
    let mut h = vec![0.0; rows * hd];
    let mut c = vec![0.0; rows * hd];
    for t in 0..pack.steps() {
        let (off, n) = (pack.offsets[t], pack.batch_sizes[t]);
        if t > 0 {
            let prev = pack.offsets[t - 1];
            let step = &mut gates[off * g4..(off + n) * g4];
            gemm(n, hd, g4, 1.0, &h[prev * hd..(prev + n) * hd], false, p.w_hh.data(), true, 1.0, step);
        }
        for b in 0..n {
            let r = off + b;
            let gr = &mut gates[r * g4..(r + 1) * g4];
            for j in 0..hd {
                let i = sigmoid(gr[j]);
                let f = sigmoid(gr[hd + j]);
                let g = gr[2 * hd + j].tanh();
                let o = sigmoid(gr[3 * hd + j]);
                gr[j] = i;
                gr[hd + j] = f;
                gr[2 * hd + j] = g;
                gr[3 * hd + j] = o;
                let c_prev = if t > 0 { c[(pack.offsets[t - 1] + b) * hd + j] } else { 0.0 };
                let cv = f * c_prev + i * g;
                c[r * hd + j] = cv;
                h[r * hd + j] = o * cv.tanh();
            }
        }
    }
    Ok(LstmCache { h, c, gates })
}

/// Gradients of one layer, accumulated into the caller's tensors.
pub struct LstmGrads<'a> {
    pub w_ih: &'a mut Tensor,
    pub w_hh: &'a mut Tensor,
    pub b: &'a mut Tensor,
}

/// Back-propagates `dh_out` (loss gradient on every packed hidden state)
/// through time; accumulates weight gradients and returns the gradient on `x`.
pub fn lstm_backward(p: &LstmParams, x: &[f64], pack: &Packing, cache: &LstmCache, dh_out: &[f64], grads: LstmGrads) -> Vec<f64> {
    let (hd, inp, rows) = (p.hidden(), p.input(), pack.total_rows());
    let g4 = 4 * hd;
    let mut dpre = vec![0.0; rows * g4];
    // recurrent gradients flowing into step t from step t + 1
    let mut dh_rec = vec![0.0; pack.batch_sizes[0] * hd];
    let mut dc_rec = vec![0.0; pack.batch_sizes[0] * hd];
    let mut n_next = 0;
    for t in (0..pack.steps()).rev() {
        let (off, n) = (pack.offsets[t], pack.batch_sizes[t]);
        for b in 0..n {
            let r = off + b;
            let gr = &cache.gates[r * g4..(r + 1) * g4];
            for j in 0..hd {
                let (i, f, g, o) = (gr[j], gr[hd + j], gr[2 * hd + j], gr[3 * hd + j]);
                let tc = cache.c[r * hd + j].tanh();
                let mut dh = dh_out[r * hd + j];
                let mut dc = 0.0;
                if b < n_next {
                    dh += dh_rec[b * hd + j];
                    dc += dc_rec[b * hd + j];
                }
                dc += dh * o * (1.0 - tc * tc);
                let c_prev = if t > 0 { cache.c[(pack.offsets[t - 1] + b) * hd + j] } else { 0.0 };
                let d = &mut dpre[r * g4..(r + 1) * g4];
                d[j] = dc * g * i * (1.0 - i);
                d[hd + j] = dc * c_prev * f * (1.0 - f);
                d[2 * hd + j] = dc * i * (1.0 - g * g);
                d[3 * hd + j] = dh * tc * o * (1.0 - o);
                dc_rec[b * hd + j] = dc * f;
            }
        }
        if t > 0 {
            gemm(n, g4, hd, 1.0, &dpre[off * g4..(off + n) * g4], false, p.w_hh.data(), false, 0.0, &mut dh_rec[..n * hd]);
        }
        n_next = n;
    }

    let mut h_prev = vec![0.0; rows * hd];
    for t in 1..pack.steps() {
        let (off, n, prev) = (pack.offsets[t], pack.batch_sizes[t], pack.offsets[t - 1]);
        h_prev[off * hd..(off + n) * hd].copy_from_slice(&cache.h[prev * hd..(prev + n) * hd]);
    }
    gemm(g4, rows, inp, 1.0, &dpre, true, x, false, 1.0, grads.w_ih.data_mut());
    gemm(g4, rows, hd, 1.0, &dpre, true, &h_prev, false, 1.0, grads.w_hh.data_mut());
    for r in 0..rows {
        for (gb, d) in grads.b.data_mut().iter_mut().zip(&dpre[r * g4..(r + 1) * g4]) {
            *gb += d;
        }
    }
    let mut dx = vec![0.0; rows * inp];
    gemm(rows, g4, inp, 1.0, &dpre, false, p.w_ih.data(), false, 0.0, &mut dx);
    dx
}
