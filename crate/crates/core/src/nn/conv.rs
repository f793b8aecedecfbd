//! 2-D convolution (stride 1, zero padding) via im2col, and 2×2 max pooling.

use super::linalg::gemm;
use super::Tensor;

/// Square input of `channels × size × size`, square `kernel`, padding `pad`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub size: usize,
    pub kernel: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_size(&self) -> usize {
        self.size + 2 * self.pad + 1 - self.kernel
    }

    fn patch(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }
}

/// Unfolds every receptive field into a column: `[C·k·k × out²]`.
pub fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (os, k, s) = (g.out_size(), g.kernel, g.size as isize);
    let mut cols = vec![0.0; g.patch() * os * os];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                for oy in 0..os {
                    let iy = (oy + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= s {
                        continue;
                    }
                    for ox in 0..os {
                        let ix = (ox + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < s {
                            cols[row * os * os + oy * os + ox] = input[(c * g.size + iy as usize) * g.size + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: sums column entries back onto the input grid.
pub fn col2im(cols: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (os, k, s) = (g.out_size(), g.kernel, g.size as isize);
    let mut out = vec![0.0; g.channels * g.size * g.size];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                for oy in 0..os {
                    let iy = (oy + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= s {
                        continue;
                    }
                    for ox in 0..os {
                        let ix = (ox + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < s {
                            out[(c * g.size + iy as usize) * g.size + ix as usize] += cols[row * os * os + oy * os + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Weights `[filters × C·k·k]`, bias `[filters]`. Returns the
/// `[filters × out²]` response and the unfolded input for backward.
pub fn conv_forward(w: &Tensor, b: &Tensor, input: &[f64], g: &ConvGeometry) -> (Vec<f64>, Vec<f64>) {
    let filters = w.shape()[0];
    let area = g.out_size() * g.out_size();
    let cols = im2col(input, g);
    let mut out = vec![0.0; filters * area];
    for f in 0..filters {
        out[f * area..(f + 1) * area].iter_mut().for_each(|v| *v = b.data()[f]);
    }
    gemm(filters, g.patch(), area, 1.0, w.data(), false, &cols, false, 1.0, &mut out);
    (out, cols)
}

/// Accumulates filter and bias gradients; returns the input gradient.
pub fn conv_backward(w: &Tensor, cols: &[f64], dout: &[f64], g: &ConvGeometry, gw: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let filters = w.shape()[0];
    let area = g.out_size() * g.out_size();
    gemm(filters, area, g.patch(), 1.0, dout, false, cols, true, 1.0, gw.data_mut());
    for f in 0..filters {
        gb.data_mut()[f] += dout[f * area..(f + 1) * area].iter().sum::<f64>();
    }
    let mut dcols = vec![0.0; g.patch() * area];
    gemm(g.patch(), filters, area, 1.0, w.data(), true, dout, false, 0.0, &mut dcols);
    col2im(&dcols, g)
}

/// 2×2 max pooling with stride 2; odd trailing rows and columns are dropped.
/// Returns the pooled map and, per output, the flat index of the winner
/// (first maximum in row-major order).
pub fn maxpool_forward(input: &[f64], channels: usize, size: usize) -> (Vec<f64>, Vec<usize>) {
    let os = size / 2;
    let mut out = vec![0.0; channels * os * os];
    let mut arg = vec![0; channels * os * os];
    for c in 0..channels {
        for oy in 0..os {
            for ox in 0..os {
                let mut best = usize::MAX;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = (c * size + 2 * oy + dy) * size + 2 * ox + dx;
                    if best == usize::MAX || input[i] > input[best] {
                        best = i;
                    }
                }
                let o = (c * os + oy) * os + ox;
                out[o] = input[best];
                arg[o] = best;
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward(dout: &[f64], arg: &[usize], input_len: usize) -> Vec<f64> {
    let mut din = vec![0.0; input_len];
    for (d, &i) in dout.iter().zip(arg) {
        din[i] += d;
    }
    din
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_filter_on_four_by_four_matches_hand_unrolled_sums() {
        let img: Vec<f64> = (0..16).map(|i| i as f64 * 0.5 - 3.0).collect();
        let k = [0.1, -0.2, 0.3, 0.0, 0.5, -0.6, 0.7, 0.8, -0.9];
        let w = Tensor::from_vec(&[1, 9], k.to_vec()).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.25]).unwrap();
        let g = ConvGeometry { channels: 1, size: 4, kernel: 3, pad: 0 };
        let (out, _) = conv_forward(&w, &b, &img, &g);
        assert_eq!(out.len(), 4);
        let px = |r: usize, c: usize| img[r * 4 + c];
        for oy in 0..2 {
            for ox in 0..2 {
                let want = 0.25
                    + k[0] * px(oy, ox) + k[1] * px(oy, ox + 1) + k[2] * px(oy, ox + 2)
                    + k[3] * px(oy + 1, ox) + k[4] * px(oy + 1, ox + 1) + k[5] * px(oy + 1, ox + 2)
                    + k[6] * px(oy + 2, ox) + k[7] * px(oy + 2, ox + 1) + k[8] * px(oy + 2, ox + 2);
                assert!((out[oy * 2 + ox] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn padded_convolution_keeps_the_size() {
        let g = ConvGeometry { channels: 2, size: 5, kernel: 3, pad: 1 };
        assert_eq!(g.out_size(), 5);
        let mut r = rng::stream(2);
        let w = Tensor::uniform(&[3, 18], 1.0, &mut r);
        let b = Tensor::zeros(&[3]);
        let img: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (out, _) = conv_forward(&w, &b, &img, &g);
        // corner output sees only the 2×2 in-bounds neighbourhood of each channel
        let mut want = 0.0;
        for c in 0..2 {
            for (ky, kx) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                want += w.data()[(c * 3 + ky) * 3 + kx] * img[(c * 5 + ky - 1) * 5 + kx - 1];
            }
        }
        assert!((out[0] - want).abs() < 1e-12);
    }

    #[test]
    fn col2im_is_the_adjoint_of_im2col() {
        let g = ConvGeometry { channels: 2, size: 6, kernel: 3, pad: 1 };
        let x: Vec<f64> = (0..72).map(|i| (i as f64 * 0.3).cos()).collect();
        let cols = im2col(&x, &g);
        let y: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.17).sin()).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, &g)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn maxpool_floors_odd_sizes_and_routes_gradients() {
        let input: Vec<f64> = (0..25).map(|i| ((i * 7) % 11) as f64).collect();
        let (out, arg) = maxpool_forward(&input, 1, 5);
        assert_eq!(out.len(), 4);
        assert_eq!(out[0], [input[0], input[1], input[5], input[6]].iter().copied().fold(f64::MIN, f64::max));
        let din = maxpool_backward(&[1.0, 2.0, 3.0, 4.0], &arg, 25);
        assert_eq!(din.iter().sum::<f64>(), 10.0);
        assert_eq!(din[arg[3]], 4.0);
    }
}
