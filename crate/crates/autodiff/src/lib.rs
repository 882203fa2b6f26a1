//! Reverse-mode automatic differentiation over small dense `f64` arrays.
//!
//! Only the primitives a causal 1-D convolutional network needs are
//! provided: grouped/dilated convolution, batch normalisation, GELU,
//! dropout, element-wise arithmetic, log-cosh and reductions. Anything else
//! can be attached with [`Graph::custom`] and a hand-written
//! [`CustomBackward`] rule.

pub mod checkpoint;
mod error;
pub mod graph;
pub mod ops;
pub mod optim;
mod tensor;

pub use error::{AutodiffError, Result};
pub use graph::{CustomBackward, Graph, Mode, Var};
pub use ops::conv::{Conv1dSpec, Padding};
pub use ops::norm::{BatchStats, RunningStats, BN_EPS};
pub use ops::pointwise::{gelu, logcosh, logcosh_grad, normal_cdf};
pub use optim::{AdamConfig, AdamState, PlateauConfig, PlateauScheduler};
pub use tensor::Tensor;
