//! Color-class tooling for classification-based image colorization.
//!
//! The crate converts 8-bit sRGB images into CIELAB, quantizes the a\*b\*
//! chroma plane into a square grid of color classes and back, reduces the
//! class grid to the classes a reference corpus actually uses, computes
//! per-batch class weights for a weighted cross-entropy objective, harmonizes
//! predicted chroma inside externally supplied segment masks, and evaluates
//! colorizations in class space.
//!
//! Every operation is a pure function over owned or borrowed buffers; nothing
//! here depends on a neural network runtime.

pub mod classgrid;
pub mod classopt;
pub mod colorspace;
pub mod error;
pub mod harmonize;
pub mod metrics;
pub mod weighting;

pub use classgrid::{BinAnalysisRow, ClassMap, GridParams};
pub use classopt::{ApprovedClassSet, ClassHistogram, DenseIndex, Threshold};
pub use colorspace::{AbPlanes, LabImage, RgbImage};
pub use error::{Error, Result};
pub use harmonize::{HarmonizeParams, SegmentMaskSet};
pub use metrics::{ImageMetrics, MetricsReport};
pub use weighting::{BatchStats, ClassDistribution, Reduction, WeightTable};
