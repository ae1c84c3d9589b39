//! Preference-conditioned sequence generation.
//!
//! A small encoder–decoder reads a grid of patch features, fuses a
//! preference vector into the encoded features through an attention layer
//! and a scaled residual, and decodes a report. Training runs maximum
//! likelihood first, then REINFORCE on a preference-weighted sum of
//! per-objective rewards with a greedy self-critical baseline, so a single
//! set of weights serves every point of the preference simplex.

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod preference;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use preference::PreferenceVector;
