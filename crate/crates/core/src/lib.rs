//! Fingerprint minutiae extraction as a chain of fixed operators:
//! intensity normalization, structure-tensor orientation, linear
//! segmentation, selective Gabor enhancement and template-matching
//! extraction, plus the losses, evaluation protocol and synthetic prints
//! used to check them.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity, clippy::assign_op_pattern)]

pub mod angle;
pub mod config;
pub mod enhancement;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod losses;
pub mod normalize;
pub mod orientation;
pub mod pgm;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod segmentation;
pub mod synth;

pub use config::{load_config, parse_config, PipelineConfig};
pub use error::{Error, Result};
pub use extraction::{Minutia, MinutiaeList};
pub use pipeline::{Pipeline, PipelineError};
pub use raster::{BinaryMask, ChannelMap, Kernel, PaddingMode};
pub use scalar::Scalar;

pub type GrayImage = raster::Image<f64>;
pub type Image = raster::Image<f64>;
pub type Kernel64 = raster::Kernel<f64>;
pub type Channels = raster::ChannelMap<f64>;
pub type OrientationField = orientation::OrientationField<f64>;
pub type StructureTensor = orientation::StructureTensor<f64>;
pub type AngleDistribution = angle::AngleDistribution<f64>;
pub type SegFeatures = segmentation::SegFeatures<f64>;
pub type SegmentationMap = segmentation::SegmentationMap<f64>;
pub type GaborBank = enhancement::GaborBank<f64>;
pub type GroupedPhases = enhancement::GroupedPhases<f64>;
pub type OrientationMask = enhancement::OrientationMask<f64>;
pub type EnhancedMap = enhancement::EnhancedMap<f64>;
pub type TemplateBank = extraction::TemplateBank<f64>;
pub type ScoreMaps = extraction::ScoreMaps<f64>;
pub type MinutiaeMaps = extraction::MinutiaeMaps<f64>;
pub type LossValue = losses::LossValue<f64>;
pub type PipelineArtifacts = pipeline::PipelineArtifacts<f64>;
