//! Small dense neural-network kernel: rectifier MLPs with named output heads,
//! reverse-mode gradients, optimizers, and finite-difference verification.

pub mod checkpoint;
mod gradcheck;
mod mlp;
mod ops;
mod optim;

pub use gradcheck::{check_gradients, grad_check, relative_error, DEFAULT_STEP};
pub use mlp::{Gradients, Head, HeadSpec, Mlp, Mode, Trace};
pub use ops::{entropy, softmax};
pub use optim::{OptimizerKind, OptimizerState};
