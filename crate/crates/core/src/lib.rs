//! Selfish-mining analysis for proof-of-work chains and block DAGs.
//!
//! The crate builds Markov decision process models of a single strategic
//! miner against honest miners (Nakamoto consensus, a full block-DAG model and
//! a miner-favoring upper-bound DAG model), solves them for the optimal
//! revenue rate, and bisects for the security threshold.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what the experiment
//! driver and simulation harness use.

pub mod analysis;
pub mod dag;
pub mod error;
pub mod mdp;
pub mod models;
pub mod runner;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Models, solvers and analysis fixed to double precision.
pub type Mdp64 = mdp::Mdp<f64>;
pub type Mdp32 = mdp::Mdp<f32>;
pub type Transition64 = mdp::Transition<f64>;
pub type SolverConfig64 = mdp::SolverConfig<f64>;
pub type SolveResult64 = mdp::SolveResult<f64>;
pub type ModelParams64 = models::ModelParams<f64>;
pub type BuiltModel64 = models::BuiltModel<f64>;
pub type ThresholdResult64 = analysis::ThresholdResult<f64>;
pub type HonestBaseline64 = analysis::HonestBaseline<f64>;
