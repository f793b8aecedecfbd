use serde::{Deserialize, Serialize};

use super::conv::{conv_backward, conv_forward, maxpool_backward, maxpool_forward, ConvGeometry};
use super::dense::{dense_backward, dense_forward};
use super::loss::{cross_entropy, dropout_mask, relu_in_place, softmax, softmax_ce_grad};
use super::{NnError, ParameterSet, Tensor};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub image: usize,
    pub conv1: usize,
    pub conv2: usize,
    pub kernel: usize,
    pub pad: usize,
    pub dense: usize,
    pub classes: usize,
    pub dropout_pct: u8,
}

impl Default for CnnConfig {
    /// 28×28 input, conv 16 → pool → conv 32 → pool → dense 128 → 37.
    fn default() -> Self {
        CnnConfig { image: 28, conv1: 16, conv2: 32, kernel: 3, pad: 0, dense: 128, classes: 37, dropout_pct: 50 }
    }
}

impl CnnConfig {
    fn geometries(&self) -> (ConvGeometry, ConvGeometry) {
        let g1 = ConvGeometry { channels: 1, size: self.image, kernel: self.kernel, pad: self.pad };
        let g2 = ConvGeometry { channels: self.conv1, size: g1.out_size() / 2, kernel: self.kernel, pad: self.pad };
        (g1, g2)
    }

    /// Width of the flattened feature map entering the dense layer.
    pub fn flat_features(&self) -> usize {
        let (_, g2) = self.geometries();
        let s = g2.out_size() / 2;
        self.conv2 * s * s
    }
}

/// One training example: a row-major `image × image` intensity grid.
#[derive(Clone, Copy, Debug)]
pub struct ImageExample<'a> {
    pub pixels: &'a [f64],
    pub label: usize,
    pub dropout_seed: u64,
}

struct Trace {
    cols1: Vec<f64>,
    c1: Vec<f64>,
    arg1: Vec<usize>,
    cols2: Vec<f64>,
    c2: Vec<f64>,
    arg2: Vec<usize>,
    p2: Vec<f64>,
    z3: Vec<f64>,
    mask: Option<Vec<f64>>,
    a3: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub params: ParameterSet,
}

impl CnnModel {
    pub fn new(config: CnnConfig, init_range: f64, seed: u64) -> Self {
        let mut r = rng::stream(seed);
        let k2 = config.kernel * config.kernel;
        let mut params = ParameterSet::new();
        params.push("conv1.w", Tensor::uniform(&[config.conv1, k2], init_range, &mut r));
        params.push("conv1.b", Tensor::uniform(&[config.conv1], init_range, &mut r));
        params.push("conv2.w", Tensor::uniform(&[config.conv2, config.conv1 * k2], init_range, &mut r));
        params.push("conv2.b", Tensor::uniform(&[config.conv2], init_range, &mut r));
        params.push("dense.w", Tensor::uniform(&[config.dense, config.flat_features()], init_range, &mut r));
        params.push("dense.b", Tensor::uniform(&[config.dense], init_range, &mut r));
        params.push("out.w", Tensor::uniform(&[config.classes, config.dense], init_range, &mut r));
        params.push("out.b", Tensor::uniform(&[config.classes], init_range, &mut r));
        CnnModel { config, params }
    }

    pub fn from_params(config: CnnConfig, params: ParameterSet) -> Result<Self, NnError> {
        if !CnnModel::new(config, 0.0, 0).params.same_layout(&params) {
            return Err(NnError::Shape("parameters do not match the CNN configuration".into()));
        }
        Ok(CnnModel { config, params })
    }

    fn forward(&self, pixels: &[f64], dropout_seed: Option<u64>) -> Result<Trace, NnError> {
        let c = &self.config;
        if pixels.len() != c.image * c.image {
            return Err(NnError::Shape(format!("expected a {0}×{0} image, got {1} pixels", c.image, pixels.len())));
        }
        let p = &self.params;
        let (g1, g2) = c.geometries();
        let (mut c1, cols1) = conv_forward(&p[0], &p[1], pixels, &g1);
        relu_in_place(&mut c1);
        let (p1, arg1) = maxpool_forward(&c1, c.conv1, g1.out_size());
        let (mut c2, cols2) = conv_forward(&p[2], &p[3], &p1, &g2);
        relu_in_place(&mut c2);
        let (p2, arg2) = maxpool_forward(&c2, c.conv2, g2.out_size());
        let z3 = dense_forward(&p[4], &p[5], &p2, 1);
        let mask = dropout_seed.map(|s| dropout_mask(s, c.dense, f64::from(c.dropout_pct) / 100.0));
        let a3: Vec<f64> = match &mask {
            Some(m) => z3.iter().zip(m).map(|(z, m)| z.max(0.0) * m).collect(),
            None => z3.iter().map(|z| z.max(0.0)).collect(),
        };
        let probs = softmax(&dense_forward(&p[6], &p[7], &a3, 1));
        Ok(Trace { cols1, c1, arg1, cols2, c2, arg2, p2, z3, mask, a3, probs })
    }

    /// Class probabilities in eval mode.
    pub fn predict(&self, pixels: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(pixels, None)?.probs)
    }

    /// Forward pass with an explicit dropout seed (`None` = eval mode).
    pub fn forward_probs(&self, pixels: &[f64], dropout_seed: Option<u64>) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(pixels, dropout_seed)?.probs)
    }

    /// Mean cross-entropy over `batch` and its gradient; examples are
    /// processed in order and their gradients summed in that order.
    pub fn loss_and_grad(&self, batch: &[ImageExample]) -> Result<(f64, ParameterSet), NnError> {
        let c = &self.config;
        let (g1, g2) = c.geometries();
        let n = batch.len() as f64;
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        for ex in batch {
            let tr = self.forward(ex.pixels, Some(ex.dropout_seed))?;
            loss += cross_entropy(&tr.probs, ex.label);
            let mut dlogits = vec![0.0; c.classes];
            softmax_ce_grad(&tr.probs, ex.label, 1.0 / n, &mut dlogits);
            let g = grads.tensors_mut();
            let (lo, hi) = g.split_at_mut(7);
            let da3 = dense_backward(&self.params[6], &tr.a3, &dlogits, 1, &mut lo[6], &mut hi[0]);
            let mask = tr.mask.as_ref().expect("training pass has a mask");
            let dz3: Vec<f64> = da3.iter().zip(mask).zip(&tr.z3).map(|((d, m), z)| if *z > 0.0 { d * m } else { 0.0 }).collect();
            let (lo, hi) = g.split_at_mut(5);
            let dp2 = dense_backward(&self.params[4], &tr.p2, &dz3, 1, &mut lo[4], &mut hi[0]);
            let mut dc2 = maxpool_backward(&dp2, &tr.arg2, tr.c2.len());
            dc2.iter_mut().zip(&tr.c2).for_each(|(d, v)| if *v <= 0.0 { *d = 0.0 });
            let (lo, hi) = g.split_at_mut(3);
            let dp1 = conv_backward(&self.params[2], &tr.cols2, &dc2, &g2, &mut lo[2], &mut hi[0]);
            let mut dc1 = maxpool_backward(&dp1, &tr.arg1, tr.c1.len());
            dc1.iter_mut().zip(&tr.c1).for_each(|(d, v)| if *v <= 0.0 { *d = 0.0 });
            let (lo, hi) = g.split_at_mut(1);
            conv_backward(&self.params[0], &tr.cols1, &dc1, &g1, &mut lo[0], &mut hi[0]);
        }
        Ok((loss / n, grads))
    }
}
