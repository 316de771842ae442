//! Non-Gaussian fermionic variational states: a Gaussian state dressed with
//! pairwise number-phase correlations, evaluated through a generalized Wick
//! theorem and optimized by a hybrid imaginary-time / gradient-descent flow.

pub mod circuit;
pub mod error;
pub mod gaussian;
pub mod hamiltonian;
pub mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod validate;
pub mod wick;

pub use error::{Error, Result};
