//! Small fully connected networks with hand-written backpropagation, used for
//! the actor (softmax head) and the critic (scalar head).

mod checkpoint;
mod mlp;
mod optim;

use thiserror::Error;

pub use mlp::{Forward, Gradients, Head, Mlp};
pub use optim::{Optimizer, OptimizerKind};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("input has {got} features, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("action index {index} out of range for {outputs} outputs")]
    ActionIndex { index: usize, outputs: usize },
    #[error("{0}")]
    Head(&'static str),
    #[error("gradient shape does not match the network")]
    GradientShape,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
