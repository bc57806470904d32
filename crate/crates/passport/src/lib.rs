//! Country-level router geolocation.
//!
//! Combines unreliable geolocation sources through an ensemble of decision
//! trees, filters predictions with speed-of-light feasibility constraints
//! derived from RTT measurements, and refines the classifier iteratively.
//! Exposed as a library, a CLI (`passport`), and an HTTP prediction
//! service.

pub mod config;
pub mod corpus;
pub mod dtree;
pub mod ensemble;
pub mod error;
pub mod evalsuite;
pub mod features;
pub mod geo;
pub mod pipeline;
pub mod service;
pub mod sol;

pub use error::{Error, Result};
