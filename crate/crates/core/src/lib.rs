//! Linear hearing-loss compensation built on a frequency-domain
//! gammatone filterbank: closed-form and least-squares compensation
//! gains, CF spacing design, prescription baselines and evaluation
//! metrics.

pub mod compensation;
pub mod dft;
mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod prescribe;
pub mod spacing;

pub use error::{Error, Result};
pub use num_complex::Complex64;
