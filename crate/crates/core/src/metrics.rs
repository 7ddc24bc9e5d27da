//! Confusion matrix, pixel accuracy and mean intersection-over-union.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{LabelMask, LABEL_UNLABELED};

/// Counts indexed by (ground truth, prediction). Column `n_classes` is the
/// abstain column: labeled truth pixels whose prediction is unlabeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
    skipped: u64,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * (n_classes + 1)],
            skipped: 0,
        }
    }

    /// Builds a matrix from a square `k × k` table with no abstentions.
    pub fn from_table<R: AsRef<[u64]>>(table: &[R]) -> Result<Self> {
        let k = table.len();
        let mut c = ConfusionMatrix::new(k);
        for (t, row) in table.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != k {
                return Err(Error::dim(format!(
                    "row {t} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (p, &v) in row.iter().enumerate() {
                c.counts[t * (k + 1) + p] = v;
            }
        }
        Ok(c)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * (self.n_classes + 1) + pred]
    }

    pub fn abstained(&self, truth: usize) -> u64 {
        self.get(truth, self.n_classes)
    }

    /// Pixels with a labeled ground truth.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pixels skipped because the ground truth was unlabeled.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    /// `k` rows of `k + 1` counts.
    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.n_classes + 1)
            .map(|r| r.to_vec())
            .collect()
    }

    fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.skipped += other.skipped;
    }

    fn tally(&mut self, pred: &[u8], truth: &[u8], offset: usize) -> Result<()> {
        let k = self.n_classes;
        for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
            if t == LABEL_UNLABELED {
                self.skipped += 1;
                continue;
            }
            let t = usize::from(t);
            let p = if p == LABEL_UNLABELED {
                k
            } else {
                usize::from(p)
            };
            if t >= k || p > k {
                return Err(Error::IllegalMaskValue {
                    index: offset + i,
                    value: if t >= k { t as u8 } else { p as u8 },
                });
            }
            self.counts[t * (k + 1) + p] += 1;
        }
        Ok(())
    }
}

/// Rows per parallel tally chunk.
const TALLY_CHUNK: usize = 1 << 14;

/// Tallies predicted against ground-truth labels. Chunks are counted in
/// parallel and summed; integer counts make the result order independent.
pub fn confusion_from_labels(
    pred: &[u8],
    truth: &[u8],
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::dim(format!(
            "prediction has {} pixels, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let chunks = pred.len().div_ceil(TALLY_CHUNK);
    let parts = par::map_range(chunks, |c| {
        let lo = c * TALLY_CHUNK;
        let hi = (lo + TALLY_CHUNK).min(pred.len());
        let mut m = ConfusionMatrix::new(n_classes);
        m.tally(&pred[lo..hi], &truth[lo..hi], lo).map(|_| m)
    });
    let mut out = ConfusionMatrix::new(n_classes);
    for part in parts {
        out.merge(&part?);
    }
    Ok(out)
}

/// Binary confusion of two label masks of the same shape.
pub fn confusion(pred: &LabelMask, truth: &LabelMask) -> Result<ConfusionMatrix> {
    if !pred.same_shape(truth) {
        return Err(Error::dim(format!(
            "prediction is {}x{}, truth is {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    confusion_from_labels(pred.as_slice(), truth.as_slice(), 2)
}

pub fn pixel_accuracy(c: &ConfusionMatrix) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "pixel accuracy of an empty confusion matrix".into(),
        ));
    }
    Ok(c.trace() as f64 / total as f64)
}

/// How classes that appear in neither prediction nor truth enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroUnion {
    /// Left out of the mean and reported as undefined.
    #[default]
    Exclude,
    /// Scored as 0.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouSummary {
    /// `None` for classes with an empty union.
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

/// `TP / (TP + FP + FN)` per class and their unweighted mean.
pub fn mean_iou(c: &ConfusionMatrix, policy: ZeroUnion) -> Result<IouSummary> {
    if c.total() == 0 {
        return Err(Error::UndefinedMetric(
            "mean IoU of an empty confusion matrix".into(),
        ));
    }
    let k = c.n_classes();
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|cls| {
            let tp = c.get(cls, cls);
            let fn_ = (0..=k)
                .filter(|&p| p != cls)
                .map(|p| c.get(cls, p))
                .sum::<u64>();
            let fp = (0..k)
                .filter(|&t| t != cls)
                .map(|t| c.get(t, cls))
                .sum::<u64>();
            let union = tp + fp + fn_;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect();
    let scored: Vec<f64> = match policy {
        ZeroUnion::Exclude => per_class.iter().flatten().copied().collect(),
        ZeroUnion::Zero => per_class.iter().map(|v| v.unwrap_or(0.0)).collect(),
    };
    if per_class.iter().all(Option::is_none) {
        return Err(Error::UndefinedMetric(
            "no class has a non-empty union".into(),
        ));
    }
    let mean = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(IouSummary { per_class, mean })
}

/// Pixel accuracy and mean IoU of one prediction, with the counts behind
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub region: String,
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub pixel_accuracy: f64,
    pub iou_per_class: Vec<Option<f64>>,
    pub mean_iou: f64,
    pub evaluated_pixels: u64,
    pub skipped_pixels: u64,
}

impl EvalReport {
    pub fn from_confusion(
        region: impl Into<String>,
        class_names: Vec<String>,
        confusion: ConfusionMatrix,
        policy: ZeroUnion,
    ) -> Result<Self> {
        let pixel_accuracy = pixel_accuracy(&confusion)?;
        let iou = mean_iou(&confusion, policy)?;
        Ok(EvalReport {
            region: region.into(),
            class_names,
            evaluated_pixels: confusion.total(),
            skipped_pixels: confusion.skipped(),
            confusion,
            pixel_accuracy,
            iou_per_class: iou.per_class,
            mean_iou: iou.mean,
        })
    }
}

/// Percentage rounded to one decimal place.
pub fn percent_1dp(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 10.0
}

pub fn evaluate(region: &str, pred: &LabelMask, truth: &LabelMask) -> Result<EvalReport> {
    EvalReport::from_confusion(
        region,
        crate::raster::default_class_names(),
        confusion(pred, truth)?,
        ZeroUnion::Exclude,
    )
}
