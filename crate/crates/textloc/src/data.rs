//! On-disk datasets and the cached (preprocessed image, target map) pairs.
//!
//! Two layouts are recognised: `images/` + `annotations/` (same stems) with
//! an optional `manifest.json` of splits, and the flat SROIE layout where
//! each image sits beside its `.txt` annotation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use textloc_core::imaging::{preprocess, PreprocessParams};
use textloc_core::maps::{render_grid, Composition};
use textloc_core::{HeatMap, Image, QuadBox};

use crate::error::{AppError, AppResult};
use crate::io;

/// Environment variable overriding the pair cache directory.
pub const CACHE_ENV: &str = "TLGAN_CACHE_DIR";

/// Bumped whenever the cached pair format or its derivation changes.
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSample {
    pub stem: String,
    pub image_path: PathBuf,
    /// Missing annotation files mean "no text" (a legal negative sample).
    pub annotation_path: Option<PathBuf>,
    pub split: Split,
}

/// `manifest.json` of the structured layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

/// Lists the samples of a dataset directory, sorted by stem. Without a
/// manifest every sample is in the training split.
pub fn load_dataset(root: &Path) -> AppResult<Vec<DocumentSample>> {
    if !root.is_dir() {
        return Err(AppError::data(format!("{}: dataset directory not found", root.display())));
    }
    let images_dir = root.join("images");
    let (image_dir, ann_dir) = if images_dir.is_dir() {
        (images_dir, root.join("annotations"))
    } else {
        (root.to_path_buf(), root.to_path_buf())
    };
    let manifest_path = root.join("manifest.json");
    let manifest: Option<DatasetManifest> = if manifest_path.is_file() {
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| AppError::io(&manifest_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| AppError::io(&manifest_path, e))?)
    } else {
        None
    };
    let mut samples = Vec::new();
    for image_path in io::list_files(&image_dir, io::is_image)? {
        let stem = io::stem(&image_path);
        let ann = ann_dir.join(format!("{stem}.txt"));
        let split = match &manifest {
            Some(m) if m.test.contains(&stem) => Split::Test,
            Some(m) if !m.train.contains(&stem) => continue,
            _ => Split::Train,
        };
        samples.push(DocumentSample {
            annotation_path: ann.is_file().then_some(ann),
            stem,
            image_path,
            split,
        });
    }
    samples.sort_by(|a, b| a.stem.cmp(&b.stem));
    Ok(samples)
}

pub fn split_of(samples: &[DocumentSample], split: Split) -> Vec<DocumentSample> {
    samples.iter().filter(|s| s.split == split).cloned().collect()
}

pub fn sample_boxes(sample: &DocumentSample) -> AppResult<Vec<QuadBox>> {
    match &sample.annotation_path {
        Some(p) => io::read_boxes(p),
        None => Ok(Vec::new()),
    }
}

/// Settings that determine a training pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub preprocess: PreprocessParams,
    pub sigma_ratio: f64,
    pub composition: Composition,
    /// Generator stride; maps are rendered at `1/stride`.
    pub stride: usize,
}

/// A preprocessed image, padded to a multiple of the stride, and its target
/// map at `1/stride` scale (8-bit quantized so fresh and cached pairs agree).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub stem: String,
    pub image: Image<u8>,
    pub map: HeatMap,
    pub scale_x: f64,
    pub scale_y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairMeta {
    stem: String,
    scale_x: f64,
    scale_y: f64,
    map_scale: f64,
    degenerate: bool,
}

/// Cache directory: the environment override, else `fallback`.
pub fn cache_dir(fallback: &Path) -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| fallback.to_path_buf())
}

fn cache_key(cfg: &PairConfig, image_bytes: &[u8], ann_bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    let p = &cfg.preprocess;
    let comp = match cfg.composition {
        Composition::Max => 0u8,
        Composition::Sum => 1,
    };
    h.update(format!(
        "v{CACHE_VERSION};{};{:e};{:e};{:e};{comp};{}",
        p.short_axis_target, p.lo_frac, p.hi_frac, cfg.sigma_ratio, cfg.stride
    ));
    h.update((image_bytes.len() as u64).to_le_bytes());
    h.update(image_bytes);
    h.update(ann_bytes);
    format!("{:x}", h.finalize())
}

/// Preprocesses one sample and renders its target map. Annotation
/// coordinates are scaled into the preprocessed frame and clipped to it.
pub fn make_pair(stem: &str, image: &Image<u8>, boxes: &[QuadBox], cfg: &PairConfig) -> AppResult<TrainingPair> {
    let pre = preprocess(image, &cfg.preprocess).map_err(|e| AppError::core(stem, e))?;
    let padded = pre.image.pad_to_multiple(cfg.stride).map_err(|e| AppError::core(stem, e))?;
    let (w, h) = (pre.image.width() as f64, pre.image.height() as f64);
    let mut quads = Vec::with_capacity(boxes.len());
    for q in boxes {
        let s = q.scaled(pre.scale_x, pre.scale_y);
        let r = s.bounding_rect();
        if r.x0 < 0.0 || r.y0 < 0.0 || r.x1 > w || r.y1 > h {
            log::warn!("{stem}: annotation {q} extends beyond the image; clipped");
            let clipped = s.corners().map(|c| textloc_core::Point::new(c.x.clamp(0.0, w), c.y.clamp(0.0, h)));
            match QuadBox::normalized(clipped) {
                Ok(c) => quads.push(c),
                Err(_) => log::warn!("{stem}: annotation {q} lies outside the image; dropped"),
            }
        } else {
            quads.push(s);
        }
    }
    let scale = 1.0 / cfg.stride as f64;
    let grid = render_grid(padded.width(), padded.height(), &quads, scale, cfg.sigma_ratio, cfg.composition).map_err(|e| AppError::core(stem, e))?;
    let map = HeatMap::from_clamped(grid, scale).map_err(|e| AppError::core(stem, e))?;
    let map = HeatMap::from_u8(map.width(), map.height(), &map.quantized_u8(), scale).map_err(|e| AppError::core(stem, e))?;
    Ok(TrainingPair {
        stem: stem.to_string(),
        image: padded,
        map,
        scale_x: pre.scale_x,
        scale_y: pre.scale_y,
    })
}

fn load_cached(dir: &Path) -> AppResult<TrainingPair> {
    let meta: PairMeta = serde_json::from_slice(&io::read_bytes(&dir.join("meta.json"))?).map_err(|e| AppError::io(&dir.join("meta.json"), e))?;
    Ok(TrainingPair {
        stem: meta.stem,
        image: io::read_image(&dir.join("image.png"))?,
        map: io::read_map_png(&dir.join("map.png"), meta.map_scale)?,
        scale_x: meta.scale_x,
        scale_y: meta.scale_y,
    })
}

fn store_cached(dir: &Path, pair: &TrainingPair) -> AppResult<()> {
    io::write_png(&dir.join("image.png"), &pair.image)?;
    io::write_map_png(&dir.join("map.png"), &pair.map)?;
    let meta = PairMeta {
        stem: pair.stem.clone(),
        scale_x: pair.scale_x,
        scale_y: pair.scale_y,
        map_scale: pair.map.scale(),
        degenerate: false,
    };
    io::write_json(&dir.join("meta.json"), &meta)
}

/// Result of materializing a set of samples.
#[derive(Debug, Default)]
pub struct PairBuild {
    pub pairs: Vec<TrainingPair>,
    pub cache_hits: usize,
    pub skipped: Vec<String>,
}

/// Materializes training pairs, reusing cache entries keyed by the pair
/// settings and the input file contents. Unreadable images are skipped with
/// a warning; malformed annotations are an error.
pub fn build_training_pairs(samples: &[DocumentSample], cfg: &PairConfig, cache: Option<&Path>) -> AppResult<PairBuild> {
    let mut out = PairBuild::default();
    for s in samples {
        let image_bytes = match io::read_bytes(&s.image_path) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("skipping {}: {e}", s.stem);
                out.skipped.push(s.stem.clone());
                continue;
            }
        };
        let ann_bytes = match &s.annotation_path {
            Some(p) => io::read_bytes(p)?,
            None => Vec::new(),
        };
        let entry = cache.map(|c| c.join(cache_key(cfg, &image_bytes, &ann_bytes)));
        if let Some(dir) = &entry {
            if dir.join("meta.json").is_file() {
                match load_cached(dir) {
                    Ok(p) => {
                        out.cache_hits += 1;
                        out.pairs.push(p);
                        continue;
                    }
                    Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", dir.display()),
                }
            }
        }
        let image = match io::read_image(&s.image_path) {
            Ok(i) => i,
            Err(e) => {
                log::warn!("skipping {}: {e}", s.stem);
                out.skipped.push(s.stem.clone());
                continue;
            }
        };
        let boxes = sample_boxes(s)?;
        let pair = make_pair(&s.stem, &image, &boxes, cfg)?;
        if let Some(dir) = &entry {
            store_cached(dir, &pair)?;
        }
        out.pairs.push(pair);
    }
    Ok(out)
}

/// Writes the structured layout: `images/`, `annotations/`, `manifest.json`.
pub fn write_dataset(root: &Path, docs: &[(String, Image<u8>, Vec<QuadBox>)], splits: &BTreeMap<String, Split>) -> AppResult<()> {
    let mut manifest = DatasetManifest::default();
    for (stem, img, boxes) in docs {
        io::write_png(&root.join("images").join(format!("{stem}.png")), img)?;
        io::write_boxes(&root.join("annotations").join(format!("{stem}.txt")), boxes)?;
        match splits.get(stem).copied().unwrap_or(Split::Train) {
            Split::Train => manifest.train.push(stem.clone()),
            Split::Test => manifest.test.push(stem.clone()),
        }
    }
    io::write_json(&root.join("manifest.json"), &manifest)
}
