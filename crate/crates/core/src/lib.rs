//! Mode-wise adaptive sequentially truncated Tucker decomposition.
//!
//! Each mode of the decomposition chooses between a Gram eigendecomposition
//! solver and an alternating least squares solver. All tensor contractions
//! run directly on the column-major buffer without forming unfoldings.

pub mod container;
pub mod driver;
pub mod error;
pub mod harness;
pub mod instrument;
pub mod kernels;
pub mod linalg;
pub mod selector;
pub mod solvers;
pub mod tensor;

pub use container::{load_tucker, save_tucker, TuckerMeta};
pub use driver::{reconstruct, relative_error, sthosvd, ModeReport, Strategy, TuckerDecomposition};
pub use error::{Error, Result};
pub use solvers::{AlsOptions, ModeResult, SolverKind};
pub use tensor::{DenseMatrix, DenseTensor, Distribution};
