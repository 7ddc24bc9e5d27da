//! Pixel-wise detection of informal settlements in multispectral rasters
//! with canonical correlation forests.
//!
//! The pipeline: [`dataset::extract_samples`] turns a raster and its label
//! mask into samples, [`dataset::prepare`] balances, splits and
//! standardizes them, [`forest::train_forest`] grows the ensemble and
//! [`forest::CcfModel::predict_raster`] labels new scenes, which
//! [`metrics`] scores by pixel accuracy and mean IoU.

pub mod dataset;
pub mod error;
pub mod forest;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod raster;
pub mod rng;
pub mod synth;

pub use dataset::{PreparedData, SampleSet, Scaler, SplitSpec};
pub use error::{Error, Result};
pub use forest::{CcfModel, TrainConfig};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use raster::{LabelMask, MultispectralRaster};
