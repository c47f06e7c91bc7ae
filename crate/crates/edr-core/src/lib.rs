//! Graph-based dimension reduction on dense tensors via the Einstein product.
//!
//! The crate provides the tensor algebra (unfolding, Einstein product, m-mode
//! product), dense spectral solvers, affinity-graph construction, the linear,
//! nonlinear and kernel reduction methods, classical matricized reference
//! implementations used as oracles, dataset loading, and evaluation helpers.

pub mod data;
pub mod dr_kernel;
pub mod dr_linear;
pub mod dr_nonlinear;
pub mod error;
pub mod eten;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod spectral;
pub mod tensor;

#[doc(hidden)]
pub mod test_util;

pub use error::{EdrError, Result};
pub use tensor::{DenseTensor, Shape, SplitSpec};
