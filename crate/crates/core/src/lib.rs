//! Mobile-edge-computing offloading: a discrete-event simulator of one base
//! station and K MEC servers, and an advantage actor-critic scheduler that
//! picks the destination server and CPU block for every arriving task.
//!
//! The delay model and the networks are generic over [`Scalar`]; the
//! simulator, agent and experiments run in `f64` through the aliases below.

pub mod agent;
pub mod baselines;
pub mod experiments;
pub mod mdp;
pub mod model;
pub mod neural;
pub mod scalar;
pub mod sim;

pub use scalar::Scalar;

pub type Task = model::Task<f64>;
pub type ServerConfig = model::ServerConfig<f64>;
pub type DelayParams = model::DelayParams<f64>;
pub type QueueSnapshot = model::QueueSnapshot<f64>;
pub type Mlp = neural::Mlp<f64>;
pub type Gradients = neural::Gradients<f64>;
