//! Synthetic multispectral scenes with known class structure.
//!
//! Each preset fixes a spatial layout for the label mask and a pair of
//! class-conditional spectral distributions:
//!
//! * `blobs`: class 1 fills a few discs; class means differ by
//!   `class_separation` along the all-ones band direction, with isotropic
//!   Gaussian noise.
//! * `oblique`: diagonal stripes; class means differ along `(b0 + b1)`
//!   only, and bands 0 and 1 carry extra nuisance variance along
//!   `(b0 - b1)`, so no single band separates the classes well.
//! * `ring`: class 1 fills an annulus; in the `(b0, b1)` plane spectra lie
//!   on circles whose radii differ by `class_separation`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::raster::{
    default_class_names, LabelMask, MultispectralRaster, LABEL_ENVIRONMENT, LABEL_INFORMAL,
    LABEL_UNLABELED,
};
use crate::rng::{self, StreamRng};

/// Nuisance standard deviation along `(b0 - b1)` for the oblique preset,
/// as a multiple of `noise_std`.
const OBLIQUE_NUISANCE: f64 = 3.0;
const RING_BASE_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Blobs,
    Oblique,
    Ring,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Preset::Blobs),
            "oblique" => Ok(Preset::Oblique),
            "ring" => Ok(Preset::Ring),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset {other:?} (expected blobs, oblique or ring)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Blobs => "blobs",
            Preset::Oblique => "oblique",
            Preset::Ring => "ring",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub preset: Preset,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub class_separation: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Width in pixels of a frame left unlabeled in the mask.
    pub unlabeled_border: usize,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        SyntheticSceneSpec {
            preset: Preset::Blobs,
            width: 64,
            height: 64,
            bands: 10,
            class_separation: 3.0,
            noise_std: 1.0,
            seed: 0,
            unlabeled_border: 0,
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::EmptyRaster);
        }
        if self.bands == 0 {
            return Err(Error::InvalidConfig(
                "a scene needs at least one band".into(),
            ));
        }
        if self.preset != Preset::Blobs && self.bands < 2 {
            return Err(Error::InvalidConfig(format!(
                "preset {} needs at least 2 bands",
                self.preset
            )));
        }
        if !(self.class_separation.is_finite() && self.class_separation >= 0.0) {
            return Err(Error::InvalidConfig(
                "class_separation must be finite and >= 0".into(),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise_std must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

fn baseline(band: usize) -> f64 {
    1.0 + 0.25 * band as f64
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

struct Disc {
    cx: f64,
    cy: f64,
    r: f64,
}

fn layout(spec: &SyntheticSceneSpec, rng: &mut StreamRng) -> Vec<u8> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let m = w.min(h);
    let mut labels = vec![LABEL_ENVIRONMENT; spec.width * spec.height];
    match spec.preset {
        Preset::Blobs => {
            let discs: Vec<Disc> = (0..4)
                .map(|_| Disc {
                    cx: rng.random_range(0.15..0.85) * w,
                    cy: rng.random_range(0.15..0.85) * h,
                    r: rng.random_range(0.15..0.25) * m,
                })
                .collect();
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    if discs
                        .iter()
                        .any(|d| (px - d.cx).powi(2) + (py - d.cy).powi(2) <= d.r * d.r)
                    {
                        labels[y * spec.width + x] = LABEL_INFORMAL;
                    }
                }
            }
        }
        Preset::Oblique => {
            let period = ((spec.width + spec.height) / 8).max(2);
            for y in 0..spec.height {
                for x in 0..spec.width {
                    if (x + y) % period < period / 2 {
                        labels[y * spec.width + x] = LABEL_INFORMAL;
                    }
                }
            }
        }
        Preset::Ring => {
            let (cx, cy) = (w / 2.0, h / 2.0);
            let (inner, outer) = (0.2 * m, 0.4 * m);
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
                    if d >= inner && d <= outer {
                        labels[y * spec.width + x] = LABEL_INFORMAL;
                    }
                }
            }
        }
    }
    labels
}

/// Fills `out` with one spectrum drawn from the class-conditional
/// distribution of `spec.preset`.
fn draw_spectrum(spec: &SyntheticSceneSpec, class: u8, rng: &mut StreamRng, out: &mut [f64]) {
    let sigma = spec.noise_std;
    let sign = if class == LABEL_INFORMAL { 0.5 } else { -0.5 };
    for (b, v) in out.iter_mut().enumerate() {
        *v = baseline(b) + sigma * normal(rng);
    }
    match spec.preset {
        Preset::Blobs => {
            let step = sign * spec.class_separation / (out.len() as f64).sqrt();
            out.iter_mut().for_each(|v| *v += step);
        }
        Preset::Oblique => {
            let along = sign * spec.class_separation / SQRT_2;
            let nuisance = OBLIQUE_NUISANCE * sigma * normal(rng) / SQRT_2;
            out[0] += along + nuisance;
            out[1] += along - nuisance;
        }
        Preset::Ring => {
            let radius = RING_BASE_RADIUS
                + if class == LABEL_INFORMAL {
                    spec.class_separation
                } else {
                    0.0
                };
            let phi = rng.random_range(0.0..2.0 * PI);
            out[0] += radius * phi.cos();
            out[1] += radius * phi.sin();
        }
    }
}

/// Deterministic raster and fully labeled mask (apart from the optional
/// unlabeled border) for `spec`.
pub fn generate_scene(spec: &SyntheticSceneSpec) -> Result<(MultispectralRaster, LabelMask)> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::SCENE_STREAM);
    let mut labels = layout(spec, &mut rng);
    let mut data = Vec::with_capacity(labels.len() * spec.bands);
    let mut buf = vec![0.0; spec.bands];
    for &class in &labels {
        draw_spectrum(spec, class, &mut rng, &mut buf);
        data.extend(buf.iter().map(|&v| v as f32));
    }

    let border = spec.unlabeled_border;
    if border > 0 {
        for y in 0..spec.height {
            for x in 0..spec.width {
                if x < border || y < border || x + border >= spec.width || y + border >= spec.height
                {
                    labels[y * spec.width + x] = LABEL_UNLABELED;
                }
            }
        }
    }

    let raster = MultispectralRaster::new(spec.width, spec.height, spec.bands, data)?;
    let mask = LabelMask::new(spec.width, spec.height, labels)?;
    Ok((raster, mask))
}

/// Accuracy of the Bayes-optimal classifier under equal class priors, the
/// setting a balanced training or evaluation set sees.
///
/// Blobs and oblique reduce to two Gaussians a distance `class_separation`
/// apart with standard deviation `noise_std` along the discriminant, giving
/// `Φ(sep / 2σ)`. The ring preset has no closed form and is estimated by
/// Monte Carlo with the exact likelihood ratio.
pub fn bayes_accuracy(spec: &SyntheticSceneSpec) -> Result<f64> {
    spec.validate()?;
    let (sep, sigma) = (spec.class_separation, spec.noise_std);
    if sep == 0.0 {
        return Ok(0.5);
    }
    if sigma == 0.0 {
        return Ok(1.0);
    }
    match spec.preset {
        Preset::Blobs | Preset::Oblique => {
            let n = Normal::new(0.0, 1.0).expect("unit normal");
            Ok(n.cdf(sep / (2.0 * sigma)))
        }
        Preset::Ring => Ok(ring_bayes_monte_carlo(sep, sigma, spec.seed, 20_000)),
    }
}

/// `ln I0(z)` by the trapezoid rule on the periodic integrand, stable for
/// large `z`.
fn ln_bessel_i0(z: f64) -> f64 {
    const STEPS: usize = 128;
    let mut acc = 0.0;
    for i in 0..STEPS {
        let phi = PI * (i as f64 + 0.5) / STEPS as f64;
        acc += (z * (phi.cos() - 1.0)).exp();
    }
    z + (acc / STEPS as f64).ln()
}

/// Log-density, up to a shared constant, of a 2-D point on a noisy circle.
fn ring_log_likelihood(r: f64, radius: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    -(radius * radius) / (2.0 * s2) + ln_bessel_i0(r * radius / s2)
}

fn ring_bayes_monte_carlo(sep: f64, sigma: f64, seed: u64, per_class: usize) -> f64 {
    let mut rng = rng::stream(seed, rng::SCENE_STREAM + 1);
    let radii = [RING_BASE_RADIUS, RING_BASE_RADIUS + sep];
    let mut correct = 0usize;
    for (class, &radius) in radii.iter().enumerate() {
        for _ in 0..per_class {
            let phi = rng.random_range(0.0..2.0 * PI);
            let x = radius * phi.cos() + sigma * normal(&mut rng);
            let y = radius * phi.sin() + sigma * normal(&mut rng);
            let r = x.hypot(y);
            let l0 = ring_log_likelihood(r, radii[0], sigma);
            let l1 = ring_log_likelihood(r, radii[1], sigma);
            let decided = usize::from(l1 > l0);
            correct += usize::from(decided == class);
        }
    }
    correct as f64 / (2 * per_class) as f64
}

/// Samples whose label is `x0 + x1 > 0` in `d` dimensions, with every
/// other dimension pure noise. `(x0, x1)` is a rotated Gaussian with
/// standard deviation 1 along `(1, 1)` and 3 along `(1, -1)`, so any single
/// coordinate predicts the label no better than `1 - atan(3)/π ≈ 0.60`.
pub fn oblique_hyperplane_samples(n: usize, d: usize, seed: u64) -> Result<SampleSet> {
    if d < 2 {
        return Err(Error::InvalidConfig("oblique samples need d >= 2".into()));
    }
    let mut rng = rng::stream(seed, rng::SCENE_STREAM + 2);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a = normal(&mut rng);
        let b = OBLIQUE_NUISANCE * normal(&mut rng);
        data.push((a + b) / SQRT_2);
        data.push((a - b) / SQRT_2);
        for _ in 2..d {
            data.push(normal(&mut rng));
        }
        labels.push(usize::from(
            data[data.len() - d] + data[data.len() - d + 1] > 0.0,
        ));
    }
    SampleSet::new(Matrix::new(n, d, data)?, labels, default_class_names())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(preset: Preset, sep: f64) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            preset,
            width: 40,
            height: 30,
            class_separation: sep,
            ..SyntheticSceneSpec::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        for p in [Preset::Blobs, Preset::Oblique, Preset::Ring] {
            let s = spec(p, 2.0);
            assert_eq!(generate_scene(&s).unwrap(), generate_scene(&s).unwrap());
            let other = SyntheticSceneSpec { seed: 1, ..s };
            assert_ne!(
                generate_scene(&other).unwrap().0,
                generate_scene(&spec(p, 2.0)).unwrap().0
            );
        }
    }

    #[test]
    fn both_classes_present() {
        for p in [Preset::Blobs, Preset::Oblique, Preset::Ring] {
            let (_, m) = generate_scene(&spec(p, 2.0)).unwrap();
            let ones = m.as_slice().iter().filter(|&&v| v == 1).count();
            assert!(ones > 100 && ones < 1100, "{p}: {ones}");
        }
    }

    #[test]
    fn border_is_unlabeled() {
        let s = SyntheticSceneSpec {
            unlabeled_border: 2,
            ..spec(Preset::Blobs, 1.0)
        };
        let (_, m) = generate_scene(&s).unwrap();
        assert_eq!(m.get(0), LABEL_UNLABELED);
        assert_eq!(m.get(2 * 40 + 1), LABEL_UNLABELED);
        assert_ne!(m.get(2 * 40 + 2), LABEL_UNLABELED);
        let unlabeled = m
            .as_slice()
            .iter()
            .filter(|&&v| v == LABEL_UNLABELED)
            .count();
        assert_eq!(unlabeled, 40 * 30 - 36 * 26);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            generate_scene(&SyntheticSceneSpec {
                width: 0,
                ..Default::default()
            }),
            Err(Error::EmptyRaster)
        ));
        assert!(generate_scene(&SyntheticSceneSpec {
            noise_std: -1.0,
            ..Default::default()
        })
        .is_err());
        assert!(generate_scene(&SyntheticSceneSpec {
            preset: Preset::Ring,
            bands: 1,
            ..Default::default()
        })
        .is_err());
        assert!("hexagons".parse::<Preset>().is_err());
        assert_eq!("ring".parse::<Preset>().unwrap(), Preset::Ring);
    }

    #[test]
    fn blob_class_means_differ_by_separation() {
        let s = SyntheticSceneSpec {
            width: 120,
            height: 120,
            class_separation: 4.0,
            ..spec(Preset::Blobs, 4.0)
        };
        let (r, m) = generate_scene(&s).unwrap();
        let mut sums = [vec![0.0; 10], vec![0.0; 10]];
        let mut counts = [0usize; 2];
        for p in 0..r.pixel_count() {
            let c = m.get(p) as usize;
            counts[c] += 1;
            for (acc, &v) in sums[c].iter_mut().zip(r.spectrum(p)) {
                *acc += v as f64;
            }
        }
        let dist: f64 = (0..10)
            .map(|b| (sums[1][b] / counts[1] as f64 - sums[0][b] / counts[0] as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((dist - 4.0).abs() < 0.15, "{dist}");
    }

    #[test]
    fn bayes_accuracy_values() {
        let zero = bayes_accuracy(&spec(Preset::Blobs, 0.0)).unwrap();
        assert_eq!(zero, 0.5);
        let far = bayes_accuracy(&spec(Preset::Blobs, 6.0)).unwrap();
        // Φ(3) = 0.998650...
        assert!((far - 0.998_650_101_968_37).abs() < 1e-9);
        assert!(far > 0.99);
        let ring_far = bayes_accuracy(&spec(Preset::Ring, 6.0)).unwrap();
        assert!(ring_far > 0.99);
        let ring_mid = bayes_accuracy(&spec(Preset::Ring, 1.0)).unwrap();
        assert!(ring_mid > 0.55 && ring_mid < 0.9, "{ring_mid}");
    }

    #[test]
    fn ln_i0_matches_series() {
        for z in [0.0f64, 0.5, 2.0, 7.0] {
            // I0(z) = sum (z/2)^(2k) / (k!)^2
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..60 {
                term *= (z / 2.0).powi(2) / (k as f64 * k as f64);
                sum += term;
            }
            assert!((ln_bessel_i0(z) - sum.ln()).abs() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn oblique_samples_label_rule() {
        let s = oblique_hyperplane_samples(500, 10, 3).unwrap();
        for (row, &l) in s.features.row_iter().zip(&s.labels) {
            assert_eq!(l, usize::from(row[0] + row[1] > 0.0));
        }
        let ones = s.labels.iter().filter(|&&l| l == 1).count();
        assert!(ones > 200 && ones < 300);
    }
}
