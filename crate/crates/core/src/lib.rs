//! Core algorithms for segmenting very large orthomosaics: sliding-window tiling,
//! dataset balancing and splitting, resolution degradation, prediction merging,
//! segmentation scoring, survey planning and a resumable task pipeline.

pub mod degrade;
pub mod error;
pub mod fsutil;
pub mod merge;
pub mod metrics;
pub mod pipeline;
pub mod predict;
pub mod raster;
pub mod sampling;
pub mod survey;
pub mod synthetic;
pub mod tiling;
pub mod workers;

pub use error::{Error, Result};
