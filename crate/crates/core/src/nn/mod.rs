//! Dense neural-network building blocks with manual backpropagation.

pub mod adam;
pub mod checkpoint;
pub mod gcn;
pub mod gradcheck;
mod init;
pub mod matrix;
pub mod mlp;

pub use adam::{adam_step, sgd_step, AdamState};
pub use gcn::{
    apply_head, argmax, loss_and_grad, loss_from_probs, sigmoid, softmax_row, Activation, Forward, GcnLayer,
    GcnModel, Head, LayerKind, ModelKind, Targets,
};
pub use gradcheck::{finite_diff_check, relative_error};
pub use init::glorot_uniform;
pub use matrix::{CsrMatrix, DenseMatrix};
pub use mlp::{Mlp, MlpCache};
