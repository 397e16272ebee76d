//! Dense tensors, reverse-mode autodiff and the Adam optimizer.

pub mod adam;
pub mod graph;
pub mod kernels;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use kernels::AttentionSpec;
pub use ops::{layer_norm, matmul, softmax};
pub use rng::SeededRng;
pub use scalar::Scalar;
pub use tensor::Tensor;
