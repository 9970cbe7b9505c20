//! Pseudospectral simulator for the time-dependent Hartree-Fock-Bogoliubov
//! system of coupled kernel equations on a periodic grid, together with a
//! harmonic-analysis toolkit (mixed space-time norms, Littlewood-Paley
//! decompositions, rotated-coordinate norms, fractional time derivatives)
//! and a sweep harness for uniform-in-N and log-N trend experiments.
//!
//! The dynamical state is a condensate wavefunction `phi` plus two pair
//! kernels: the symmetric pairing density `Lambda_p` and the hermitian
//! one-particle density `Gamma_p`. Rank-one condensate contributions
//! `Lambda_c = phi (x) phi` and `Gamma_c = conj(phi) (x) phi` are derived on
//! demand. Conventions that the whole crate relies on are documented in
//! [`evolution`] (sign conventions of the coupled system) and [`spectral`]
//! (transform normalization).

pub mod bogoliubov;
pub mod config;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod lp;
pub mod monitors;
pub mod norms;
pub mod potential;
pub mod spectral;

pub use error::HfbError;
pub use grid::Grid;
pub use kernel::{Field1, Kernel2, Symmetry};
