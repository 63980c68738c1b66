//! Certified bounds for input-affine polynomial systems under semidefinite-representable
//! uncertainty.
//!
//! The pipeline: [`polyalg`] polynomials describe dynamics; [`sdrset`] describes the
//! input set `W`; [`lierobust`] eliminates `w` from the Lie constraint through conic
//! duality; [`sostighten`] turns the result into a cone program at a fixed degree;
//! [`analysis`] builds peak, distance, reach and ROA programs and sweeps degrees;
//! [`simulate`] samples trajectories to cross-check; [`recovery`] reads moments out of
//! dual solutions.

pub mod analysis;
pub mod cases;
pub mod config;
pub mod datadriven;
pub mod lierobust;
pub mod lp;
pub mod polyalg;
pub mod recovery;
pub mod sdrset;
pub mod simulate;
pub mod sostighten;

pub use lie_robust_conic as conic;
