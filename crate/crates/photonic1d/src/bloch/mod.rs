//! Bloch-Floquet machinery: fiber operators over the Brillouin zone, band
//! structures with analytic labeling, and the discrete Bloch transform.

mod bands;
mod fiber;
mod transform;

pub use bands::{
    group_velocity, solve_bands, uniform_kgrid, BandSample, BandSolverConfig, BandStructure,
    BandTrace, FlaggedPoint,
};
pub use fiber::{assemble_fiber, FiberFamily, FiberProblem};
pub use transform::{
    bloch_analyze, bloch_synthesize, BlochBasis, BlochExpansion, GridBandRef,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlochError {
    #[error("convolution matrix is not positive definite at truncation N = {n_modes}; \
             increase N or check the medium")]
    CholeskyFailure { n_modes: usize },
    #[error("band labeling ambiguous near k = {k}: best eigenvector overlap {overlap:.3} \
             after refinement; refine the k-grid")]
    LabelingAmbiguity { k: f64, overlap: f64 },
    #[error("band structure carries no eigenvectors")]
    MissingEigenvectors,
    #[error("domain of length {domain} is not commensurate with the cell of period {period}")]
    IncommensurateDomain { domain: f64, period: f64 },
}
