//! Continuous-variable state tomography for degraded squeezed light.
//!
//! The crate simulates squeezed thermal states in a truncated Fock basis,
//! degrades them with loss and phase noise, samples homodyne records, and
//! reconstructs density matrices either by iterative maximum likelihood or
//! with a small residual convolutional network whose Cholesky head keeps
//! every prediction physical.

pub mod channels;
pub mod degradation;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod homodyne;
pub mod io;
pub mod metrics;
pub mod mle;
pub mod nn;
pub mod recipes;
pub mod rng;
pub mod simulate;
pub mod states;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, SqueezeParams, Truncation};
