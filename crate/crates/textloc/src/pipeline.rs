//! Image → predicted map → boxes, and scoring over a dataset.

use std::collections::BTreeMap;
use std::path::Path;

use textloc_core::imaging::{bicubic_resize, localize_from_map, preprocess};
use textloc_core::nn::{Generator, Mode, Network, Tensor};
use textloc_core::{evaluate, EvalReport, Grid, HeatMap, Image, QuadBox};

use crate::config::RunConfig;
use crate::data::{sample_boxes, DocumentSample};
use crate::error::{AppError, AppResult};

/// Predicts the text map of a document at the document's own resolution
/// (scale 1), quantized to 8 bits exactly as it would be stored on disk.
pub fn predict_map(generator: &mut Generator<f32>, cfg: &RunConfig, image: &Image<u8>, name: &str) -> AppResult<HeatMap> {
    let err = |e| AppError::core(name, e);
    let s = generator.config().stride;
    let pre = preprocess(image, &cfg.preprocess_params()).map_err(err)?;
    let img = match generator.config().in_channels {
        3 => pre.image.to_rgb(),
        _ => pre.image.to_gray(),
    };
    let padded = img.pad_to_multiple(s).map_err(err)?;
    let unit = padded.to_unit_f32();
    let x = Tensor::from_vec(1, unit.height(), unit.width(), unit.channels(), unit.into_vec()).map_err(err)?;
    let y = generator.forward(&x, Mode::Infer).map_err(err)?.channel_mean();
    let values: Vec<f64> = y.data().iter().map(|&v| ((f64::from(v) + 1.0) / 2.0).clamp(0.0, 1.0)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AppError::Numeric(format!("{name}: non-finite generator output")));
    }
    let small = HeatMap::new(Grid::from_vec(y.width(), y.height(), values).map_err(err)?, 1.0 / s as f64).map_err(err)?;
    let full = bicubic_resize(&small, padded.width(), padded.height()).map_err(err)?;
    let cropped = full.grid().window(0, 0, pre.image.width(), pre.image.height()).map_err(err)?;
    let pre_map = HeatMap::new(cropped, 1.0).map_err(err)?;
    let back = bicubic_resize(&pre_map, image.width(), image.height()).map_err(err)?;
    HeatMap::from_u8(back.width(), back.height(), &back.quantized_u8(), 1.0).map_err(err)
}

/// Boxes of a scale-1 map, in the map's pixel coordinates.
pub fn localize(map: &HeatMap, cfg: &RunConfig, name: &str) -> AppResult<Vec<QuadBox>> {
    let scale = 1.0 / map.scale();
    localize_from_map(map, &cfg.postprocess_params(), (scale, scale)).map_err(|e| AppError::core(name, e))
}

/// Detections for every sample, keyed by stem.
pub fn detect_all(generator: &mut Generator<f32>, cfg: &RunConfig, samples: &[DocumentSample]) -> AppResult<BTreeMap<String, Vec<QuadBox>>> {
    let mut out = BTreeMap::new();
    for s in samples {
        let image = crate::io::read_image(&s.image_path)?;
        let map = predict_map(generator, cfg, &image, &s.stem)?;
        out.insert(s.stem.clone(), localize(&map, cfg, &s.stem)?);
    }
    Ok(out)
}

/// Scores detections against ground truth over the union of stems; a stem
/// missing on either side counts as an empty list.
pub fn score(det: &BTreeMap<String, Vec<QuadBox>>, gt: &BTreeMap<String, Vec<QuadBox>>, cfg: &RunConfig) -> AppResult<EvalReport> {
    let stems: std::collections::BTreeSet<&String> = det.keys().chain(gt.keys()).collect();
    let d: Vec<Vec<QuadBox>> = stems.iter().map(|s| det.get(*s).cloned().unwrap_or_default()).collect();
    let g: Vec<Vec<QuadBox>> = stems.iter().map(|s| gt.get(*s).cloned().unwrap_or_default()).collect();
    evaluate(&d, &g, &cfg.match_params()).map_err(|e| AppError::core("eval", e))
}

pub fn ground_truth(samples: &[DocumentSample]) -> AppResult<BTreeMap<String, Vec<QuadBox>>> {
    samples.iter().map(|s| Ok((s.stem.clone(), sample_boxes(s)?))).collect()
}

/// End-to-end score of a generator on `samples`.
pub fn evaluate_samples(generator: &mut Generator<f32>, cfg: &RunConfig, samples: &[DocumentSample]) -> AppResult<EvalReport> {
    let det = detect_all(generator, cfg, samples)?;
    score(&det, &ground_truth(samples)?, cfg)
}

pub fn report_line(r: &EvalReport) -> String {
    format!("precision={:?} recall={:?} hmean={:?}", r.precision, r.recall, r.hmean)
}

pub fn report_json(r: &EvalReport) -> serde_json::Value {
    serde_json::json!({
        "precision": r.precision,
        "recall": r.recall,
        "hmean": r.hmean,
        "matched": r.matched,
        "num_detections": r.num_detections,
        "num_ground_truth": r.num_ground_truth,
    })
}

/// Reads every `*.txt` box file of a directory, keyed by stem.
pub fn read_box_dir(dir: &Path) -> AppResult<BTreeMap<String, Vec<QuadBox>>> {
    let files = crate::io::list_files(dir, |p| p.extension().is_some_and(|e| e == "txt"))?;
    files.iter().map(|p| Ok((crate::io::stem(p), crate::io::read_boxes(p)?))).collect()
}
