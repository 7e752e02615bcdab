//! Dense `f64` tensors with define-by-run reverse-mode differentiation,
//! an Adam optimizer and a bit-exact checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{Result, TensorError};
pub use params::{BoundParams, ParamSet};
pub use tape::{sigmoid, Gradients, Tape, Var, BCE_EPS};
pub use tensor::Tensor;
