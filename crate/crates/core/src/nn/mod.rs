//! Small 64-bit neural-network kernel: exactly the layers the two
//! recognizers use, each with a hand-written backward pass.

mod cnn;
pub mod container;
pub mod conv;
pub mod dense;
pub mod linalg;
pub mod loss;
pub mod lstm;
pub mod optim;
mod rnn;
mod tensor;

use thiserror::Error;

pub use cnn::{CnnConfig, CnnModel, ImageExample};
pub use optim::{clip_gradients, AdamConfig, AdamState};
pub use rnn::{RnnConfig, RnnModel, SequenceExample};
pub use tensor::{ParameterSet, Tensor};

/// Default half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.08;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model container: {0}")]
    Container(String),
}
