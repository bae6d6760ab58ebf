//! Traversability simulation: procedural terrain, a kinematic wheel-contact
//! pose solver, arc motion primitives, failure labelling, image encoding and
//! evaluation of predicted failure probabilities.

pub mod actions;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod parallel;
pub mod plot;
pub mod raster;
pub mod robot;
pub mod sim;
pub mod terrain;

pub use error::{Error, Result};
