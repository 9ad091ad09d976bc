//! Riemannian Gauss-Newton for estimating low Tucker-rank tensors from
//! linear measurements.
//!
//! Modes are zero-based throughout the API: mode `0` is the first mode.

pub mod error;
pub mod init;
pub mod linalg;
pub mod manifold;
pub mod measurement;
pub mod random;
pub mod rgn;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use manifold::{TangentBasis, TangentVector};
pub use measurement::{MeasurementEnsemble, SketchedCovariates};
pub use rgn::{IterationTrace, RgnConfig};
pub use tensor::{DenseTensor, Shape};
pub use tucker::{Truncation, TuckerRank, TuckerTensor};
