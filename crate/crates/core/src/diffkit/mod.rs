//! Reverse-mode differentiation, SeLU networks and first-order optimizers.

mod mlp;
mod optim;
mod params;
mod real;
mod tape;

pub use mlp::{
    mlp_forward, mlp_forward_jacobian, mlp_forward_tangents, mlp_input_jacobian, mlp_input_jvp,
    MlpSpec,
};
pub use optim::{lr_schedule, Adam};
pub use params::{ParamVector, Segment};
pub use real::{selu, selu_prime, selu_second, Real, SELU_ALPHA, SELU_LAMBDA};
pub use tape::{grad, Tape, Var};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid network: {0}")]
    BadSpec(String),
    #[error("invalid parameter layout: {0}")]
    Layout(String),
    #[error("non-finite gradient at coordinate {index}")]
    NonFiniteGradient { index: usize },
}
