//! Tablet handwriting screening: glyph recognizers over pen trajectories
//! (LSTM) and rendered images (CNN), and the per-child D-statistic that turns
//! recognizer confidence into a screening verdict.

pub mod augment;
pub mod diagnosis;
pub mod glyph;
pub mod harness;
pub mod nn;
pub mod recognizer;
pub mod rng;
pub mod synth;
