//! Fully connected layer over a batch of rows: `y = x · Wᵀ + b` with `W`
//! stored `[out × in]`.

use super::linalg::gemm;
use super::Tensor;

pub fn dense_forward(w: &Tensor, b: &Tensor, x: &[f64], rows: usize) -> Vec<f64> {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    let mut y = vec![0.0; rows * out];
    for r in 0..rows {
        y[r * out..(r + 1) * out].copy_from_slice(b.data());
    }
    gemm(rows, inp, out, 1.0, x, false, w.data(), true, 1.0, &mut y);
    y
}

/// Accumulates `dW += dyᵀ · x` and `db += Σ dy`; returns `dx = dy · W`.
pub fn dense_backward(w: &Tensor, x: &[f64], dy: &[f64], rows: usize, gw: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    gemm(out, rows, inp, 1.0, dy, true, x, false, 1.0, gw.data_mut());
    for r in 0..rows {
        for (g, d) in gb.data_mut().iter_mut().zip(&dy[r * out..(r + 1) * out]) {
            *g += d;
        }
    }
    let mut dx = vec![0.0; rows * inp];
    gemm(rows, out, inp, 1.0, dy, false, w.data(), false, 0.0, &mut dx);
    dx
}
