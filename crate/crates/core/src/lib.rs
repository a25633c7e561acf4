//! Adaptive estimation of a signal observed in continuous time under Lévy
//! noise, by penalized weighted least squares over a finite family of
//! Pinsker-type weights.

pub mod basis;
pub mod detection;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod io;
pub mod noise_sim;
pub mod pipeline;
pub mod risk;
pub mod seed;

pub use error::{MspError, Result};
