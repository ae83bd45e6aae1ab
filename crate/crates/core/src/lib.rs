//! Physical-wavelet analysis and synthesis of solutions of the homogeneous
//! wave equation `u_tt − c²Δu = 0` in three dimensions.
//!
//! Fields live on uniform periodic grids and all transforms follow the
//! continuum convention `û(k) = ∫ u(r) e^{−ik·r} d³r`.

pub mod admissibility;
pub mod cwt;
pub mod error;
pub mod fields;
pub mod format;
pub mod oracle;
pub mod quadrature;
pub mod synthesis;
pub mod wavelets;

pub use error::{Error, Result};

#[cfg(test)]
mod test_support;
