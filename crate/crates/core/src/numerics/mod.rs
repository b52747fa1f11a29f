//! Minimal dense linear algebra with reverse-mode differentiation.
//!
//! Everything is 64-bit floating point. The centerpiece is [`Tape`], which
//! records the handful of primitive operations a value network needs
//! (affine transforms, sigmoid/tanh, elementwise product and sum, the
//! convex blend used by gated cells, and a masked mean-squared-error
//! reduction) during an eager forward pass and replays them in reverse to
//! accumulate parameter gradients. [`grad_check`] verifies any recorded
//! computation against central finite differences.

mod gradcheck;
mod matrix;
mod ops;
mod optim;
mod params;
mod tape;

pub use gradcheck::grad_check;
pub use matrix::Matrix;
pub use ops::{affine, mse_loss, sigmoid, sigmoid_scalar};
pub use optim::RmsProp;
pub use params::{ParamGrads, ParamId, ParameterSet};
pub use tape::{NodeId, Src, Tape};

use thiserror::Error;

/// Errors from the numerics layer.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("tape terminal node is not a scalar")]
    NoScalarTerminal,
    #[error("gradient-check epsilon {0} outside (0, 1e-2]")]
    BadEpsilon(f64),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
