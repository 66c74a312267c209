//! Search-based testing of semantic segmentation models.
//!
//! A genetic search explores simulator ego poses, turns each pose into a
//! simulated frame and its ground truth, translates the frame into a realistic
//! image, and scores the segmentation model under test on it. Individuals are
//! ranked on two objectives: low segmentation accuracy and distance from an
//! archive of failures already found.

pub mod backends;
pub mod campaign;
pub mod error;
pub mod features;
pub mod fitness;
pub mod metrics;
pub mod profile;
pub mod raster;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
pub use profile::Profile;
