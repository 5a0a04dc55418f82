//! Spectral and scattering numerics for one-dimensional coupled photonic crystals.
//!
//! A coupled photonic crystal is a pair of periodic dielectric waveguides joined
//! near the origin. The electromagnetic field `(phi_E, phi_H)` obeys a first-order
//! Maxwell system `i d/dt phi = w D phi`, where `D` swaps the components and
//! differentiates, and `w` is a 2x2 Hermitian positive-definite weight built from
//! the constitutive functions (permittivity, permeability, bi-anisotropic
//! coupling). The operator is self-adjoint in the weighted inner product
//! `<phi, w^{-1} psi>`.
//!
//! The crate provides:
//!
//! - [`media`]: weights from constitutive profiles, periodic media, junction scenes;
//! - [`bloch`]: fiber operators over the Brillouin zone, band structures, group
//!   velocities, and the discrete Bloch transform on commensurate grids;
//! - [`spectral`]: thresholds, band/gap bookkeeping, Mourre constants, flat-band
//!   certificates, and interface (gap) eigenstates of the coupled system;
//! - [`dynamics`]: real-space discretization and norm-conserving time evolution;
//! - [`scattering`]: the junction identification operator, wave-operator
//!   iteration, asymptotic velocities, and time-domain transmission/reflection;
//! - [`oracle`]: closed-form transfer-matrix references for piecewise-constant
//!   media, used as an independent cross-check;
//! - [`scene`]: JSON scene configuration for the command-line front end.

pub mod bloch;
pub mod dynamics;
pub mod media;
pub mod oracle;
pub mod scattering;
pub mod scene;
pub mod spectral;

mod fourier;
mod linalg;
mod mat2;

pub use mat2::Mat2;
