//! Dense tensor arithmetic with reverse-mode gradients.

pub mod tape;
pub mod tensor;

pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
