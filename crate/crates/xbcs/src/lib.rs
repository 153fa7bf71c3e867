//! Blind compressed sensing with an adaptive square sparsifying transform.
//!
//! Reconstructs a complex-valued image from undersampled linear measurements
//! (Fourier/k-space in the MRI case) while simultaneously learning an n×n
//! transform that sparsifies the image's overlapping patches. The solver is a
//! block coordinate descent over three exact update steps: sparse coding
//! (projection onto an aggregate l0 ball, or hard thresholding), a closed-form
//! transform update, and a closed-form or CG image update that exploits the
//! block-circulant structure of the patch normal operator.
//!
//! Modules:
//! - [`patches`]: image grid, patch extraction and its adjoint
//! - [`sparse`]: exact sparse coding operators
//! - [`transform`]: transform penalty and closed-form transform updates
//! - [`image_update`]: constrained least-squares image updates (k-space fast
//!   path and generic dense path)
//! - [`sensing`]: unitary 2D DFT, sampling masks, k-space simulation
//! - [`solver`]: objective evaluation and the outer descent loop
//! - [`metrics`]: PSNR and high-frequency error norm
//! - [`svd`]: one-sided Jacobi SVD used by the exact update steps
//! - [`oracles`]: brute-force reference implementations for the test suite

pub mod error;
pub mod image_update;
pub mod metrics;
pub mod oracles;
pub mod patches;
pub mod sensing;
pub mod solver;
pub mod sparse;
pub mod svd;
pub mod transform;

pub use error::{Error, Result};
pub use patches::{ImageGrid, PatchConfig, PatchMatrix};
pub use sensing::{KSpaceData, SamplingMask, SensingOperator};
pub use sparse::SparseCodes;
pub use transform::{Transform, TransformMode};

/// Complex sample type used throughout: double-precision complex.
pub type C64 = num_complex::Complex64;
