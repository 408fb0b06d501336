//! Reverse-mode differentiation, smooth nonlinearities and the Adam optimizer.

mod adam;
pub mod gradcheck;
mod matrix;
mod nonlinear;
mod params;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use matrix::Matrix;
pub use nonlinear::{sigmoid, softplus};
pub use params::ParamSet;
pub use tape::{Gradients, NodeId, Tape};

#[derive(Debug, thiserror::Error)]
pub enum DiffError {
    #[error("backward requires a 1x1 output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },
    #[error("tape already consumed by a backward pass; record a new forward pass")]
    TapeConsumed,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
