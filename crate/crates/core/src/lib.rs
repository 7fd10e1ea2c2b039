//! Tensor completion with arbitrary sampling patterns, including pure
//! forecasting where the future is wholly missing, by convolution nuclear
//! norm minimization (CNNM) and DFT-based ℓ1 minimization.

pub mod conv;
pub mod error;
pub mod io;
mod linalg;
pub mod pipeline;
pub mod select;
pub mod solvers;
pub mod spectral;
pub mod tensor;
pub mod theory;

pub use conv::{ConvOperator, ConvSpectrum, KernelShape};
pub use error::{Error, Result};
pub use solvers::{SolveReport, SolverConfig};
pub use spectral::ComplexTensor;
pub use tensor::{DenseTensor, SamplingMask, Shape};
