//! Raster/mask pairs to balanced, standardized, stratified sample sets.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_stats, standardize, ColumnStats, Matrix};
use crate::raster::{default_class_names, LabelMask, MultispectralRaster, LABEL_UNLABELED};
use crate::rng;

/// Per-band standardization parameters stored with a model.
pub type Scaler = ColumnStats;

/// Tabular training data: one spectrum per row plus its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl SampleSet {
    pub fn new(features: Matrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::dim(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::DegenerateLabels(format!(
                "label {bad} outside {} classes",
                class_names.len()
            )));
        }
        Ok(SampleSet {
            features,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> SampleSet {
        SampleSet {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn standardized(&self, scaler: &Scaler) -> Result<SampleSet> {
        Ok(SampleSet {
            features: standardize(&self.features, scaler)?,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        })
    }

    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }
}

/// Train/test split settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Number of the `n` samples of one class that go to training.
    pub fn train_count(&self, n: usize) -> usize {
        // the epsilon keeps exact products such as 0.29 * 100 from flooring low
        let t = (self.train_fraction * n as f64 + 1e-9).floor() as usize;
        t.min(n.saturating_sub(1))
    }
}

/// One sample per labeled pixel, in row-major pixel order. Unlabeled and
/// nodata pixels are skipped.
pub fn extract_samples(raster: &MultispectralRaster, mask: &LabelMask) -> Result<SampleSet> {
    if raster.width() != mask.width() || raster.height() != mask.height() {
        return Err(Error::dim(format!(
            "raster is {}x{} but mask is {}x{}",
            raster.width(),
            raster.height(),
            mask.width(),
            mask.height()
        )));
    }
    let bands = raster.bands();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for p in 0..raster.pixel_count() {
        let label = mask.get(p);
        if label == LABEL_UNLABELED || raster.is_nodata(p) {
            continue;
        }
        values.extend(raster.spectrum(p).iter().map(|&v| f64::from(v)));
        labels.push(usize::from(label));
    }
    if labels.is_empty() {
        return Err(Error::ZeroLabeledPixels);
    }
    let features = Matrix::new(labels.len(), bands, values)?;
    SampleSet::new(features, labels, default_class_names())
}

/// Concatenates the samples of several raster/mask pairs, in pair order.
pub fn assemble_region_dataset(pairs: &[(&MultispectralRaster, &LabelMask)]) -> Result<SampleSet> {
    let Some(((first, _), rest)) = pairs.split_first() else {
        return Err(Error::ZeroLabeledPixels);
    };
    if let Some((r, _)) = rest.iter().find(|(r, _)| r.bands() != first.bands()) {
        return Err(Error::dim(format!(
            "band mismatch across regions: {} vs {}",
            first.bands(),
            r.bands()
        )));
    }
    let mut features = Matrix::zeros(0, first.bands());
    let mut labels = Vec::new();
    for (raster, mask) in pairs {
        let s = extract_samples(raster, mask)?;
        features = features.vstack(&s.features)?;
        labels.extend(s.labels);
    }
    SampleSet::new(features, labels, default_class_names())
}

fn require_classes(s: &SampleSet) -> Result<Vec<usize>> {
    let counts = s.class_counts();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateLabels(format!(
            "need at least 2 classes present, found {present}"
        )));
    }
    Ok(counts)
}

/// Downsamples every class without replacement to the smallest class count
/// and shuffles the result.
///
/// Classes with no samples at all are ignored when taking the minimum.
pub fn balance_classes<R: Rng + ?Sized>(s: &SampleSet, rng: &mut R) -> Result<SampleSet> {
    let counts = require_classes(s)?;
    let target = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(target * counts.len());
    for members in s.indices_by_class() {
        if members.is_empty() {
            continue;
        }
        let chosen = index::sample(rng, members.len(), target);
        keep.extend(chosen.iter().map(|i| members[i]));
    }
    keep.shuffle(rng);
    Ok(s.subset(&keep))
}

/// Row indices of a per-class random split; `floor(fraction · n_c)` of each
/// class goes to the first list. Both lists are in ascending row order.
pub fn stratified_split_indices(
    s: &SampleSet,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::SPLIT_STREAM);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in s.indices_by_class().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::TooFewSamples(format!(
                "class {class} has {} sample(s), need at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train = spec.train_count(members.len());
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(s: &SampleSet, spec: &SplitSpec) -> Result<(SampleSet, SampleSet)> {
    let (train, test) = stratified_split_indices(s, spec)?;
    Ok((s.subset(&train), s.subset(&test)))
}

/// Standardization statistics fitted on training samples only.
pub fn fit_scaler(train: &SampleSet) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::TooFewSamples(
            "cannot fit a scaler on no samples".into(),
        ));
    }
    column_stats(&train.features)
}

/// Balanced, split and standardized data ready for training.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: SampleSet,
    pub test: SampleSet,
    pub scaler: Scaler,
}

/// Balance, then split, then fit the scaler on the training part and apply
/// it to both parts.
pub fn prepare(samples: &SampleSet, spec: &SplitSpec) -> Result<PreparedData> {
    let mut balance_rng = rng::stream(spec.seed, rng::BALANCE_STREAM);
    let balanced = balance_classes(samples, &mut balance_rng)?;
    let (train, test) = stratified_split(&balanced, spec)?;
    let scaler = fit_scaler(&train)?;
    Ok(PreparedData {
        train: train.standardized(&scaler)?,
        test: test.standardized(&scaler)?,
        scaler,
    })
}
