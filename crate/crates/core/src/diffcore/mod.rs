//! Differentiable numerical substrate: dense tensors, a reverse-mode tape,
//! layer primitives and optimizers. Everything is 64-bit.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod matrix;
pub mod numeric;
pub mod optim;
mod params;
mod tape;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use layers::{linear_forward, GruCell, GruStep, Linear, Mlp};
pub use matrix::Matrix;
pub use numeric::{argmax, entropy, log_softmax, log_sum_exp, softmax};
pub use optim::{OptimizerKind, OptimizerState};
pub use params::{ParamId, ParamStore, ParamTensor};
pub use tape::{Tape, Var};
