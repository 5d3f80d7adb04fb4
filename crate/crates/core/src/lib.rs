//! Gaussian time-frequency algebra for entanglement-enhanced lidar.
//!
//! Pure states of photon time/frequency coordinates are kept in closed form
//! as `exp(-x^T A x / 2 + b^T x + c)`; every operation in the simulator
//! (Fourier transforms, displacements, the signal-idler beam-splitter map,
//! sampling, overlaps) maps such a state to another such state exactly.

pub mod biphoton;
pub mod bsi;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod glm;
pub mod montecarlo;
pub mod rng;
pub mod sdc;
pub mod stats;

pub use error::{Error, Result};
pub use gaussian::{CoordLabel, GaussianAmplitude, MeasurementDensity, Rep, Role};
