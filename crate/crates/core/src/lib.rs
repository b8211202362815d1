//! Difficulty-aware group relative policy optimization on a toy categorical policy.
//!
//! The crate is split along the pipeline:
//!
//! - [`policy`]: a position-conditioned categorical policy with analytic log-probability gradients
//! - [`rewards`]: format, classification, cosine-length and repetition rewards
//! - [`grpo`]: group advantages, response resampling, difficulty reweighting and the clipped objective
//! - [`heatmap`]: windowed min-cosine-distance heatmaps and the batchnorm/conv projector
//! - [`taskgen`]: annotation records to multiple-choice questions
//! - [`harness`]: seeded end-to-end experiments, metrics CSV and reports

pub mod error;
pub mod grpo;
pub mod harness;
pub mod heatmap;
pub mod policy;
pub mod rewards;
pub mod taskgen;

pub use error::{Error, Result};
