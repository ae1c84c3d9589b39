//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is a tape rebuilt on every forward pass. Operations append
//! nodes holding their forward value plus whatever the backward rule needs;
//! [`Graph::backward`] walks the tape in reverse from a scalar root.
//! Broadcasting is limited to a row vector over a matrix (`add_row`,
//! `mul_row`); every other shape mismatch is an error.

mod checkpoint;
mod gradcheck;
mod graph;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use graph::{Gradients, Graph, Var, MASK_VALUE};
pub use tensor::{log_softmax, log_sum_exp, matmul, softmax_in_place, Tensor};
pub(crate) use tensor::gemm;
