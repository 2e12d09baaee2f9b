//! Tensors, reverse-mode differentiation, Adam, gradient checking and the
//! parameter archive format.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod graph;
mod params;
mod random;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{grad_check, Difference, GradCheckOptions, GradCheckReport};
pub use graph::{forward_backward, forward_only, forward_with_branches, Graph, Var};
pub use params::{glorot_bound, ParamId, ParamStore};
pub use random::{derive_seed, rng_from_seed, sample_standard_normal, stable_hash};
pub use tensor::{log_sum_exp, softmax, Tensor};
