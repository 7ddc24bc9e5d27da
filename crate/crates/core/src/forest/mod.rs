//! Canonical correlation forests: training and inference.
//!
//! Every tree sees the full training set. Randomness enters only through
//! the per-node feature draw and the projection bootstrap, and tree `i`
//! reads its own RNG stream derived from `(seed, i)`, so serial and
//! parallel training build identical forests.

pub mod split;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::{SampleSet, Scaler};
use crate::error::{Error, Result};
use crate::linalg::DEFAULT_GAMMA;
use crate::par;
use crate::raster::{LabelMask, MultispectralRaster, LABEL_INFORMAL, LABEL_UNLABELED};
use crate::rng;

pub use split::SplitChoice;
pub use tree::{
    grow_node, project_point, propose_split, NodeContext, SplitProposal, Tree, TreeNode,
};

pub const FORMAT_VERSION: &str = "ccf-1";

/// Probability written for pixels that were not predicted.
pub const PROB_NODATA: f32 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub min_node_size: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    /// Features drawn per node; `None` means `ceil(log2(d)) + 1`.
    pub feature_subsample: Option<usize>,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 10,
            min_node_size: 2,
            max_depth: None,
            feature_subsample: None,
            gamma: DEFAULT_GAMMA,
            seed: 0,
        }
    }
}

pub fn default_feature_subsample(d: usize) -> usize {
    if d <= 1 {
        return 1;
    }
    let log2 = (d as f64).log2().ceil() as usize;
    (log2 + 1).min(d)
}

impl TrainConfig {
    pub fn resolved_feature_subsample(&self, d: usize) -> usize {
        self.feature_subsample
            .unwrap_or_else(|| default_feature_subsample(d))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_node_size == 0 {
            return Err(Error::InvalidConfig(
                "min_node_size must be at least 1".into(),
            ));
        }
        let fs = self.resolved_feature_subsample(d);
        if fs == 0 || fs > d {
            return Err(Error::InvalidConfig(format!(
                "feature_subsample must lie in 1..={d}, got {fs}"
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Trained forest with the standardization it expects its inputs to go
/// through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcfModel {
    pub format_version: String,
    pub n_bands: usize,
    pub class_names: Vec<String>,
    pub config: TrainConfig,
    pub scaler: Scaler,
    pub trees: Vec<Tree>,
}

/// Trains a forest on samples that were already standardized with
/// `scaler`. The scaler is stored so raw spectra can be predicted later.
pub fn train_forest(samples: &SampleSet, scaler: Scaler, config: &TrainConfig) -> Result<CcfModel> {
    let d = samples.n_features();
    if d == 0 {
        return Err(Error::dim("samples have no features"));
    }
    config.validate(d)?;
    if scaler.len() != d || scaler.stddev.len() != d {
        return Err(Error::dim(format!(
            "scaler covers {} bands, samples have {d}",
            scaler.len()
        )));
    }
    let present = samples.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training needs at least 2 classes present, found {present}"
        )));
    }
    if samples.len() < 2 * config.min_node_size {
        return Err(Error::TooFewSamples(format!(
            "{} samples, need at least {}",
            samples.len(),
            2 * config.min_node_size
        )));
    }

    let ctx = NodeContext {
        features: &samples.features,
        labels: &samples.labels,
        n_classes: samples.n_classes(),
        feature_subsample: config.resolved_feature_subsample(d),
        gamma: config.gamma,
    };
    let trees = par::map_range(config.n_trees, |t| {
        let mut rng = rng::stream(config.seed, t as u64);
        grow_node(&ctx, (0..samples.len()).collect(), 0, config, &mut rng)
    });

    Ok(CcfModel {
        format_version: FORMAT_VERSION.to_string(),
        n_bands: d,
        class_names: samples.class_names.clone(),
        config: config.clone(),
        scaler,
        trees,
    })
}

impl CcfModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn check_bands(&self, got: usize) -> Result<()> {
        if got != self.n_bands {
            return Err(Error::dim(format!(
                "band mismatch: model expects {}, input has {got}",
                self.n_bands
            )));
        }
        Ok(())
    }

    /// Averages leaf distributions over trees for an already standardized
    /// spectrum, writing into `out`.
    fn accumulate(&self, standardized: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for tree in &self.trees {
            for (o, p) in out.iter_mut().zip(tree.leaf_probs(standardized)) {
                *o += p;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
    }

    fn standardize_into(&self, spectrum: impl Iterator<Item = f64>, buf: &mut [f64]) {
        for (b, v) in buf.iter_mut().zip(spectrum) {
            *b = v;
        }
        self.scaler.apply_row(buf);
    }

    /// Class distribution for one raw spectrum.
    pub fn predict_proba(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        self.check_bands(spectrum.len())?;
        let mut buf = vec![0.0; self.n_bands];
        self.standardize_into(spectrum.iter().copied(), &mut buf);
        let mut out = vec![0.0; self.n_classes()];
        self.accumulate(&buf, &mut out);
        Ok(out)
    }

    pub fn predict_class(&self, spectrum: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(spectrum)?))
    }

    /// Class distribution for a spectrum that already went through
    /// `self.scaler`.
    pub fn predict_proba_standardized(&self, standardized: &[f64]) -> Result<Vec<f64>> {
        self.check_bands(standardized.len())?;
        let mut out = vec![0.0; self.n_classes()];
        self.accumulate(standardized, &mut out);
        Ok(out)
    }

    /// Predicted class of every row of an already standardized sample set.
    pub fn predict_samples(&self, standardized: &SampleSet) -> Result<Vec<usize>> {
        self.check_bands(standardized.n_features())?;
        let predictions = par::map_range(standardized.len(), |i| {
            let mut out = vec![0.0; self.n_classes()];
            self.accumulate(standardized.features.row(i), &mut out);
            argmax(&out)
        });
        Ok(predictions)
    }

    /// Per-pixel classes and informal-class probabilities for a raster.
    /// Nodata pixels come out unlabeled with probability [`PROB_NODATA`].
    pub fn predict_raster(&self, raster: &MultispectralRaster) -> Result<RasterPrediction> {
        self.check_bands(raster.bands())?;
        let (w, h) = (raster.width(), raster.height());
        let informal = usize::from(LABEL_INFORMAL).min(self.n_classes().saturating_sub(1));
        let mut labels = vec![LABEL_UNLABELED; w * h];
        let mut probs = vec![PROB_NODATA; w * h];

        let mut rows: Vec<(&mut [u8], &mut [f32])> =
            labels.chunks_mut(w).zip(probs.chunks_mut(w)).collect();
        par::for_each_chunk_mut(&mut rows, 1, |row, chunk| {
            let (labels, probs) = &mut chunk[0];
            let mut buf = vec![0.0; self.n_bands];
            let mut dist = vec![0.0; self.n_classes()];
            for col in 0..w {
                let p = row * w + col;
                if raster.is_nodata(p) {
                    continue;
                }
                self.standardize_into(raster.spectrum(p).iter().map(|&v| f64::from(v)), &mut buf);
                self.accumulate(&buf, &mut dist);
                labels[col] = argmax(&dist) as u8;
                probs[col] = dist[informal] as f32;
            }
        });

        Ok(RasterPrediction {
            mask: LabelMask::new(w, h, labels)?,
            informal_probability: probs,
        })
    }

    /// Structural checks applied to deserialized models.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(self.format_version.clone()));
        }
        if self.n_bands == 0 {
            return bad("n_bands is zero".into());
        }
        if self.scaler.mean.len() != self.n_bands || self.scaler.stddev.len() != self.n_bands {
            return bad(format!(
                "scaler length differs from n_bands {}",
                self.n_bands
            ));
        }
        if self.class_names.len() < 2 {
            return bad("fewer than 2 classes".into());
        }
        if self.trees.len() != self.config.n_trees {
            return bad(format!(
                "{} trees stored, config says {}",
                self.trees.len(),
                self.config.n_trees
            ));
        }
        let k = self.n_classes();
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return bad(format!("tree {t} has no nodes"));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    TreeNode::Internal {
                        feature_indices,
                        projection,
                        threshold,
                        left_idx,
                        right_idx,
                    } => {
                        if feature_indices.is_empty() || feature_indices.len() != projection.len() {
                            return bad(format!(
                                "tree {t} node {i}: feature/projection length mismatch"
                            ));
                        }
                        if feature_indices.iter().any(|&f| f >= self.n_bands) {
                            return bad(format!("tree {t} node {i}: feature index out of range"));
                        }
                        if !threshold.is_finite() || projection.iter().any(|v| !v.is_finite()) {
                            return bad(format!("tree {t} node {i}: non-finite split"));
                        }
                        for &c in [left_idx, right_idx] {
                            if c <= i || c >= tree.nodes.len() {
                                return bad(format!(
                                    "tree {t} node {i}: child index {c} out of range"
                                ));
                            }
                        }
                    }
                    TreeNode::Leaf {
                        class_counts,
                        class_probs,
                    } => {
                        if class_counts.len() != k || class_probs.len() != k {
                            return bad(format!("tree {t} node {i}: leaf has wrong class count"));
                        }
                        if class_counts.iter().all(|&c| c == 0) {
                            return bad(format!("tree {t} node {i}: empty leaf"));
                        }
                        let sum: f64 = class_probs.iter().sum();
                        if class_probs.iter().any(|p| p.is_nan() || *p < 0.0)
                            || (sum - 1.0).abs() > 1e-9
                        {
                            return bad(format!(
                                "tree {t} node {i}: leaf probabilities not normalized"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterPrediction {
    pub mask: LabelMask,
    /// Row-major `height × width`.
    pub informal_probability: Vec<f32>,
}

impl RasterPrediction {
    pub fn probability_raster(&self) -> Result<MultispectralRaster> {
        Ok(MultispectralRaster::new(
            self.mask.width(),
            self.mask.height(),
            1,
            self.informal_probability.clone(),
        )?
        .with_nodata(Some(PROB_NODATA)))
    }
}
