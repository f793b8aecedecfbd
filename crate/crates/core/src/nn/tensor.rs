use rand::Rng;

use super::NnError;
use crate::rng::StreamRng;

/// Dense row-major array of f64.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(NnError::Shape(format!("shape {shape:?} needs {want} values, got {}", data.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Values drawn from the open interval (-range, range); zeros when
    /// `range` is 0.
    pub fn uniform(shape: &[usize], range: f64, rng: &mut StreamRng) -> Self {
        let mut t = Tensor::zeros(shape);
        if range <= 0.0 {
            return t;
        }
        for v in &mut t.data {
            *v = loop {
                let x = range * (2.0 * rng.random::<f64>() - 1.0);
                if x.abs() < range {
                    break x;
                }
            };
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

/// Named tensors in a fixed order. Models address their parameters by
/// position; names exist for serialization and error messages.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParameterSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, tensor: Tensor) -> usize {
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn zeros_like(&self) -> Self {
        ParameterSet { names: self.names.clone(), tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Largest absolute component (the L∞ norm of the flattened set).
    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_layout(&self, other: &ParameterSet) -> bool {
        self.names == other.names && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape() == b.shape())
    }

    /// Adds `scale * other` component-wise.
    pub fn add_scaled(&mut self, other: &ParameterSet, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }
}

impl std::ops::Index<usize> for ParameterSet {
    type Output = Tensor;
    fn index(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }
}

impl std::ops::IndexMut<usize> for ParameterSet {
    fn index_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }
}
