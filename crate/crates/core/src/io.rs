//! File formats.
//!
//! Rasters and masks are a JSON header `<name>.json` next to a raw payload
//! `<name>.bin`. Raster payloads are little-endian `f32`, band-sequential
//! (all of band 0 row by row, then band 1, ...). Mask payloads are one byte
//! per pixel. Models are `<name>.ccf.json`, evaluation reports
//! `<name>.report.json`, sample dumps `<name>.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::forest::{CcfModel, FORMAT_VERSION};
use crate::metrics::{percent_1dp, EvalReport};
use crate::raster::{is_mask_value, LabelMask, MultispectralRaster};

pub const DTYPE_F32: &str = "f32le";
pub const DTYPE_U8: &str = "u8";
pub const LAYOUT: &str = "band-sequential";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: String,
    pub layout: String,
    #[serde(default)]
    pub nodata: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_names: Option<Vec<String>>,
}

impl RasterHeader {
    fn payload_len(&self, bytes_per_value: u64) -> Option<u64> {
        (self.width as u64)
            .checked_mul(self.height as u64)?
            .checked_mul(self.bands as u64)?
            .checked_mul(bytes_per_value)
    }
}

/// `<name>.bin` for a header at `<name>.json`.
pub fn payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn to_json_pretty<T: Serialize>(value: &T, path: &Path) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_header(path: &Path, dtype: &str) -> Result<RasterHeader> {
    let malformed = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = read_file(path)?;
    let header: RasterHeader =
        serde_json::from_slice(&bytes).map_err(|e| malformed(e.to_string()))?;
    if header.dtype != dtype {
        return Err(malformed(format!(
            "dtype {:?}, expected {dtype:?}",
            header.dtype
        )));
    }
    if header.layout != LAYOUT {
        return Err(malformed(format!(
            "layout {:?}, expected {LAYOUT:?}",
            header.layout
        )));
    }
    if header.width == 0 || header.height == 0 || header.bands == 0 {
        return Err(Error::EmptyRaster);
    }
    if dtype == DTYPE_U8 && header.bands != 1 {
        return Err(malformed(format!(
            "mask must have 1 band, header says {}",
            header.bands
        )));
    }
    if header.nodata.is_some_and(|v| !v.is_finite()) {
        return Err(malformed("nodata must be finite".into()));
    }
    if let Some(names) = &header.band_names {
        if names.len() != header.bands {
            return Err(malformed(format!(
                "{} band names for {} bands",
                names.len(),
                header.bands
            )));
        }
    }
    Ok(header)
}

fn check_payload(
    path: &Path,
    header: &RasterHeader,
    bytes_per_value: u64,
    actual: usize,
) -> Result<()> {
    let expected = header
        .payload_len(bytes_per_value)
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "raster dimensions overflow".into(),
        })?;
    if expected != actual as u64 {
        return Err(Error::PayloadLength {
            path: path.to_path_buf(),
            expected,
            actual: actual as u64,
        });
    }
    Ok(())
}

/// Writes `<name>.json` plus the payload beside it.
pub fn write_raster(raster: &MultispectralRaster, header_path: &Path) -> Result<()> {
    let header = RasterHeader {
        width: raster.width(),
        height: raster.height(),
        bands: raster.bands(),
        dtype: DTYPE_F32.into(),
        layout: LAYOUT.into(),
        nodata: raster.nodata,
        band_names: raster.band_names.clone(),
    };
    let (pixels, bands) = (raster.pixel_count(), raster.bands());
    let mut payload = Vec::with_capacity(pixels * bands * 4);
    for b in 0..bands {
        for p in 0..pixels {
            payload.extend_from_slice(&raster.spectrum(p)[b].to_le_bytes());
        }
    }
    write_file(header_path, &to_json_pretty(&header, header_path)?)?;
    write_file(&payload_path(header_path), &payload)
}

pub fn read_raster(header_path: &Path, payload: &Path) -> Result<MultispectralRaster> {
    let header = read_header(header_path, DTYPE_F32)?;
    let bytes = read_file(payload)?;
    check_payload(payload, &header, 4, bytes.len())?;

    let (pixels, bands) = (header.width * header.height, header.bands);
    let mut data = vec![0f32; pixels * bands];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(Error::NonFinitePayload {
                path: payload.to_path_buf(),
                offset: 4 * i as u64,
            });
        }
        let (b, p) = (i / pixels, i % pixels);
        data[p * bands + b] = v;
    }
    let mut raster = MultispectralRaster::new(header.width, header.height, bands, data)?
        .with_nodata(header.nodata);
    raster.band_names = header.band_names;
    Ok(raster)
}

/// [`read_raster`] with the payload path derived from the header path.
pub fn read_raster_at(header_path: &Path) -> Result<MultispectralRaster> {
    read_raster(header_path, &payload_path(header_path))
}

pub fn write_mask(mask: &LabelMask, header_path: &Path) -> Result<()> {
    let header = RasterHeader {
        width: mask.width(),
        height: mask.height(),
        bands: 1,
        dtype: DTYPE_U8.into(),
        layout: LAYOUT.into(),
        nodata: None,
        band_names: None,
    };
    write_file(header_path, &to_json_pretty(&header, header_path)?)?;
    write_file(&payload_path(header_path), mask.as_slice())
}

pub fn read_mask(header_path: &Path, payload: &Path) -> Result<LabelMask> {
    let header = read_header(header_path, DTYPE_U8)?;
    let bytes = read_file(payload)?;
    check_payload(payload, &header, 1, bytes.len())?;
    if let Some(index) = bytes.iter().position(|&v| !is_mask_value(v)) {
        return Err(Error::IllegalMaskValue {
            index,
            value: bytes[index],
        });
    }
    LabelMask::new(header.width, header.height, bytes)
}

pub fn read_mask_at(header_path: &Path) -> Result<LabelMask> {
    read_mask(header_path, &payload_path(header_path))
}

/// Compact JSON encoding of a model. Floats are written with the shortest
/// representation that parses back to the same bits.
pub fn model_to_json(model: &CcfModel) -> Result<String> {
    serde_json::to_string(model).map_err(|e| Error::InvalidModel(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<CcfModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_str()) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(Error::UnsupportedVersion(other.to_string())),
        None => return Err(Error::InvalidModel("missing format_version".into())),
    }
    let model: CcfModel =
        serde_json::from_value(value).map_err(|e| Error::InvalidModel(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &CcfModel, path: &Path) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<CcfModel> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
    model_from_json(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class: String,
    pub iou: Option<f64>,
    pub iou_percent: Option<f64>,
}

/// On-disk form of an [`EvalReport`]. Confusion rows are ground-truth
/// classes; columns are predicted classes followed by the abstain column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub region: String,
    pub pixel_accuracy_percent: f64,
    pub mean_iou_percent: f64,
    pub pixel_accuracy: f64,
    pub mean_iou: f64,
    pub iou_per_class: Vec<ClassIou>,
    pub confusion: Vec<Vec<u64>>,
    pub evaluated_pixels: u64,
    pub skipped_pixels: u64,
}

impl From<&EvalReport> for ReportDocument {
    fn from(r: &EvalReport) -> Self {
        ReportDocument {
            region: r.region.clone(),
            pixel_accuracy_percent: percent_1dp(r.pixel_accuracy),
            mean_iou_percent: percent_1dp(r.mean_iou),
            pixel_accuracy: r.pixel_accuracy,
            mean_iou: r.mean_iou,
            iou_per_class: r
                .class_names
                .iter()
                .zip(&r.iou_per_class)
                .map(|(name, iou)| ClassIou {
                    class: name.clone(),
                    iou: *iou,
                    iou_percent: iou.map(percent_1dp),
                })
                .collect(),
            confusion: r.confusion.rows(),
            evaluated_pixels: r.evaluated_pixels,
            skipped_pixels: r.skipped_pixels,
        }
    }
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let doc = ReportDocument::from(report);
    write_file(path, &to_json_pretty(&doc, path)?)
}

pub fn read_report(path: &Path) -> Result<ReportDocument> {
    serde_json::from_slice(&read_file(path)?).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// `band_1,...,band_B,label` header then one line per sample.
pub fn write_samples_csv(samples: &SampleSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    let names: Vec<String> = (1..=samples.n_features())
        .map(|b| format!("band_{b}"))
        .collect();
    out.push_str(&names.join(","));
    out.push_str(",label\n");
    for (row, label) in samples.features.row_iter().zip(&samples.labels) {
        for v in row {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&label.to_string());
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{train_forest, TrainConfig};
    use crate::linalg::{ColumnStats, Matrix};
    use crate::raster::default_class_names;
    use tempfile::tempdir;

    fn raster() -> MultispectralRaster {
        let data: Vec<f32> = (0..3 * 2 * 4).map(|v| v as f32 * 0.1 - 1.0).collect();
        let mut r = MultispectralRaster::new(3, 2, 4, data)
            .unwrap()
            .with_nodata(Some(-9999.0));
        r.band_names = Some(vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        r
    }

    #[test]
    fn raster_round_trip_and_layout() {
        let dir = tempdir().unwrap();
        let h = dir.path().join("scene.json");
        let r = raster();
        write_raster(&r, &h).unwrap();
        let bytes = fs::read(dir.path().join("scene.bin")).unwrap();
        assert_eq!(bytes.len(), 3 * 2 * 4 * 4);
        // band-sequential: second value is pixel 1, band 0
        assert_eq!(&bytes[4..8], &r.spectrum(1)[0].to_le_bytes());
        let back = read_raster_at(&h).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn raster_length_errors() {
        let dir = tempdir().unwrap();
        let h = dir.path().join("scene.json");
        write_raster(&raster(), &h).unwrap();
        let bin = payload_path(&h);
        let full = fs::read(&bin).unwrap();
        fs::write(&bin, &full[..full.len() - 3]).unwrap();
        let err = read_raster_at(&h).unwrap_err();
        let msg = err.to_string();
        assert!(
            matches!(
                err,
                Error::PayloadLength {
                    expected: 96,
                    actual: 93,
                    ..
                }
            ),
            "{msg}"
        );
        assert!(msg.contains("96") && msg.contains("93"));
    }

    #[test]
    fn raster_nan_reports_offset() {
        let dir = tempdir().unwrap();
        let h = dir.path().join("scene.json");
        write_raster(&raster(), &h).unwrap();
        let bin = payload_path(&h);
        let mut bytes = fs::read(&bin).unwrap();
        bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&bin, bytes).unwrap();
        assert!(matches!(
            read_raster_at(&h),
            Err(Error::NonFinitePayload { offset: 8, .. })
        ));
    }

    #[test]
    fn malformed_headers() {
        let dir = tempdir().unwrap();
        let h = dir.path().join("x.json");
        fs::write(dir.path().join("x.bin"), [0u8; 4]).unwrap();
        for text in [
            "not json",
            r#"{"width":1,"height":1,"bands":1,"dtype":"f64le","layout":"band-sequential"}"#,
            r#"{"width":1,"height":1,"bands":1,"dtype":"f32le","layout":"interleaved"}"#,
            r#"{"width":1,"height":1,"bands":1,"dtype":"f32le","layout":"band-sequential","extra":1}"#,
            r#"{"width":1,"height":1,"bands":2,"dtype":"f32le","layout":"band-sequential","band_names":["a"]}"#,
        ] {
            fs::write(&h, text).unwrap();
            assert!(
                matches!(read_raster_at(&h), Err(Error::MalformedHeader { .. })),
                "{text}"
            );
        }
        fs::write(
            &h,
            r#"{"width":0,"height":0,"bands":1,"dtype":"f32le","layout":"band-sequential"}"#,
        )
        .unwrap();
        assert!(matches!(read_raster_at(&h), Err(Error::EmptyRaster)));
    }

    #[test]
    fn mask_round_trip_and_illegal_byte() {
        let dir = tempdir().unwrap();
        let h = dir.path().join("mask.json");
        let m = LabelMask::new(2, 2, vec![0, 1, 255, 1]).unwrap();
        write_mask(&m, &h).unwrap();
        assert_eq!(read_mask_at(&h).unwrap(), m);
        fs::write(payload_path(&h), [0u8, 1, 7, 1]).unwrap();
        assert!(matches!(
            read_mask_at(&h),
            Err(Error::IllegalMaskValue { index: 2, value: 7 })
        ));
    }

    fn tiny_model() -> CcfModel {
        let x = Matrix::from_rows(&[
            [0.0, 1.0],
            [1.0, 0.5],
            [2.0, -1.0],
            [3.0, 0.0],
            [0.5, 2.0],
            [2.5, 1.5],
        ])
        .unwrap();
        let s = SampleSet::new(x, vec![0, 0, 1, 1, 0, 1], default_class_names()).unwrap();
        let sc = ColumnStats {
            mean: vec![0.1, -0.2],
            stddev: vec![1.5, 0.7],
        };
        train_forest(
            &s,
            sc,
            &TrainConfig {
                n_trees: 3,
                ..TrainConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn model_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.ccf.json");
        let m = tiny_model();
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
    }

    #[test]
    fn model_rejects_version_and_bad_child() {
        let m = tiny_model();
        let text = model_to_json(&m).unwrap();
        let v2 = text.replace("\"ccf-1\"", "\"ccf-2\"");
        assert!(matches!(model_from_json(&v2), Err(Error::UnsupportedVersion(v)) if v == "ccf-2"));

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let nodes = value["trees"][0]["nodes"].as_array_mut().unwrap();
        let internal = nodes.iter_mut().find(|n| n["kind"] == "internal").unwrap();
        internal["right_idx"] = serde_json::json!(100_000);
        assert!(matches!(
            model_from_json(&value.to_string()),
            Err(Error::InvalidModel(_))
        ));
        assert!(model_from_json("{}").is_err());
    }

    #[test]
    fn samples_csv_layout() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let x = Matrix::from_rows(&[[0.5, 1.0], [2.0, -3.25]]).unwrap();
        let s = SampleSet::new(x, vec![1, 0], default_class_names()).unwrap();
        write_samples_csv(&s, &p).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "band_1,band_2,label\n0.5,1,1\n2,-3.25,0\n"
        );
    }
}
