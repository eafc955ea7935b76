//! Differentiable building blocks: a reverse-mode tape, dense and recurrent
//! layers, the optimizer, gradient checking and parameter checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod graph;
pub mod gru;
pub mod param;

pub use adam::{Adam, DEFAULT_LR};
pub use checkpoint::{Checkpoint, Manifest};
pub use dense::{Activation, DenseNet, DenseVars, DEFAULT_HIDDEN};
pub use gradcheck::{grad_check, relative_error, GradCheck};
pub use graph::{Graph, Var};
pub use gru::{GruCell, GruVars};
pub use param::{flatten_grads, soft_update, Grads, Module, Param};
