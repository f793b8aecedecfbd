use rand::Rng;

use crate::rng;

/// Probabilities below this are floored before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to `z`,
/// scaled by `scale`. When the floor is active the loss is locally constant
/// and the gradient is zero.
pub fn softmax_ce_grad(probs: &[f64], label: usize, scale: f64, out: &mut [f64]) {
    if probs[label] < PROB_FLOOR {
        out.iter_mut().for_each(|g| *g = 0.0);
        return;
    }
    for (k, (g, p)) in out.iter_mut().zip(probs).enumerate() {
        *g = scale * (p - if k == label { 1.0 } else { 0.0 });
    }
}

/// Inverted-dropout multipliers: 0 with probability `p`, else 1/(1-p).
pub fn dropout_mask(seed: u64, n: usize, p: f64) -> Vec<f64> {
    let mut r = rng::stream(seed);
    let keep = 1.0 / (1.0 - p);
    (0..n).map(|_| if r.random::<f64>() < p { 0.0 } else { keep }).collect()
}

pub fn relu_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}
