//! Dense tensors, reverse-mode autodiff, gradient checking and Adam.

mod adam;
mod gradcheck;
mod sparse;
pub mod special;
mod tape;
mod tensor;

pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState, StepInfo};
pub use gradcheck::{finite_diff_check, GradCheck};
pub use sparse::SparseRows;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{sigmoid, Tensor};
