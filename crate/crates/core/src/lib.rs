//! Hierarchical graph recurrent networks (HGRN) for partially observable
//! multi-agent reinforcement learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`diffcore`]: dense 64-bit tensors, a reverse-mode tape, layers and optimizers.
//! * [`agentgraph`]: proximity graphs over agents and neighbourhood observation sets.
//! * [`hgrn`]: group-wise encoders, two stacked hierarchical graph attention
//!   layers with skip connections, GRU memory and Q/policy heads.
//! * [`envs`]: gridworld environments (Surviving, Pursuit, Cooperative Treasure
//!   Collection) plus two diagnostics (MemoryCorridor, a stationary bandit).
//! * [`training`]: recurrent replay, soft Q-learning with an adaptive temperature,
//!   the actor-critic variant, the DQN baseline and ablation switches.
//! * [`harness`]: experiment specs, evaluation, transfer and introspection runs.

// `!(x > 0.0)` is how config checks reject NaN along with the bad range,
// and index loops read better than zips in the dense kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agentgraph;
pub mod diffcore;
pub mod envs;
mod error;
pub mod harness;
pub mod hgrn;
pub mod training;

pub use error::{Error, Result};

pub use agentgraph::{AgentGraph, ObservationSet};
pub use diffcore::{Matrix, ParamId, ParamStore, ParamTensor, Tape, Var};
pub use envs::{EnvConfig, Environment, StepResult};
pub use hgrn::{CommMode, Hgrn, HgrnConfig, HiddenStates};
pub use training::{Algorithm, TrainConfig};
