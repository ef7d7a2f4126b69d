//! The training run: crop pre-generation, batch sampling, loss log,
//! checkpoints, resume and interruption.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textloc_core::imaging::{random_crop_pair_with, CropPair};
use textloc_core::nn::{FeatureNet, Tensor};
use textloc_core::train::{train_step, Batch, StepLosses, TrainState};
use textloc_core::Error as CoreError;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::TrainingPair;
use crate::error::{AppError, AppResult};
use crate::io;

pub const LOSS_HEADER: &str = "step,d_loss,g_adv,content,feature";
pub const CHECKPOINT_FILE: &str = "checkpoint.safetensors";
pub const LOSS_FILE: &str = "losses.csv";

/// Stream offset separating the crop draws from every other seeded stream.
const CROP_STREAM: u64 = 0x63_726f_70;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Overrides `training.total_steps`.
    pub steps: Option<u64>,
    pub resume: Option<PathBuf>,
    /// Polled between steps; when set the run checkpoints and stops.
    pub interrupt: Option<Arc<AtomicBool>>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub state: TrainState<f32>,
    pub checkpoint: PathBuf,
    pub losses: Vec<StepLosses>,
}

/// `crops_per_image` aligned crops per pair, drawn once from the run seed.
pub fn pregenerate_crops(pairs: &[TrainingPair], cfg: &RunConfig) -> AppResult<Vec<CropPair<u8>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(CROP_STREAM);
    let in_channels = cfg.network.generator.in_channels;
    let mut crops = Vec::with_capacity(pairs.len() * cfg.training.crops_per_image);
    for p in pairs {
        let image = match (p.image.channels(), in_channels) {
            (1, 3) => p.image.to_rgb(),
            (3, 1) => p.image.to_gray(),
            (a, b) if a == b => p.image.clone(),
            (a, b) => return Err(AppError::usage(format!("{}: {a}-channel image for a {b}-channel generator", p.stem))),
        };
        for _ in 0..cfg.training.crops_per_image {
            crops.push(random_crop_pair_with(&image, &p.map, cfg.training.crop, &mut rng).map_err(|e| AppError::core(&p.stem, e))?);
        }
    }
    Ok(crops)
}

/// Draws `batch_size` crops uniformly with replacement.
pub fn sample_batch(crops: &[CropPair<u8>], batch_size: usize, rng: &mut ChaCha8Rng) -> AppResult<Batch<f32>> {
    let first = crops.first().ok_or_else(|| AppError::data("no training crops"))?;
    let (w, h, c) = (first.image.width(), first.image.height(), first.image.channels());
    let (mw, mh) = (first.map.width(), first.map.height());
    let mut images = Vec::with_capacity(batch_size * w * h * c);
    let mut maps = Vec::with_capacity(batch_size * mw * mh);
    for _ in 0..batch_size {
        let crop = &crops[rng.random_range(0..crops.len())];
        images.extend(crop.image.data().iter().map(|&v| f32::from(v) / 255.0));
        maps.extend(crop.map.values().iter().map(|&v| v as f32));
    }
    let images = Tensor::from_vec(batch_size, h, w, c, images).map_err(|e| AppError::core("batch", e))?;
    let maps = Tensor::from_vec(batch_size, mh, mw, 1, maps).map_err(|e| AppError::core("batch", e))?;
    Ok(Batch { images, maps })
}

/// Settings that must agree between a checkpoint and the run resuming it.
fn resume_key(cfg: &RunConfig) -> RunConfig {
    let mut k = cfg.clone();
    k.training.total_steps = 0;
    k.training.checkpoint_every = 0;
    k.training.log_every = 0;
    k.paths = Default::default();
    k.postprocess = Default::default();
    k.eval = Default::default();
    k
}

fn format_row(l: &StepLosses) -> String {
    format!("{},{},{},{},{}", l.step, l.d_loss, l.g_adv, l.content, l.feature)
}

/// Keeps the header and the rows up to `step`; recreates a missing log.
fn reset_loss_log(path: &Path, step: u64) -> AppResult<()> {
    let mut text = String::from(LOSS_HEADER);
    text.push('\n');
    if step > 0 {
        if let Ok(old) = fs::read_to_string(path) {
            for line in old.lines().skip(1) {
                match line.split(',').next().and_then(|s| s.parse::<u64>().ok()) {
                    Some(s) if s <= step => {
                        text.push_str(line);
                        text.push('\n');
                    }
                    _ => {}
                }
            }
        }
    }
    io::write_atomic(path, text.as_bytes())
}

/// Trains on pre-generated crops of `pairs` and writes `losses.csv` and
/// `checkpoint.safetensors` under `out`.
pub fn train_loop(cfg: &RunConfig, pairs: &[TrainingPair], phi: &mut FeatureNet<f32>, out: &Path, opts: &TrainOptions) -> AppResult<TrainOutcome> {
    if pairs.is_empty() {
        return Err(AppError::data("training set is empty"));
    }
    let total = opts.steps.unwrap_or(cfg.training.total_steps);
    let mut state = match &opts.resume {
        Some(path) => {
            let (state, manifest) = checkpoint::load(path)?;
            if resume_key(&manifest.config) != resume_key(cfg) {
                return Err(AppError::usage(format!(
                    "{}: checkpoint was written with a different configuration",
                    path.display()
                )));
            }
            log::info!("resuming from {} at step {}", path.display(), state.step);
            state
        }
        None => TrainState::new(cfg.generator(), cfg.discriminator(), cfg.adam(), cfg.seed).map_err(|e| AppError::core("network", e))?,
    };
    let ck_path = out.join(CHECKPOINT_FILE);
    let log_path = out.join(LOSS_FILE);
    reset_loss_log(&log_path, state.step)?;

    let crops = pregenerate_crops(pairs, cfg)?;
    log::info!("{} crops from {} images; training steps {}..{}", crops.len(), pairs.len(), state.step, total);
    let weights = cfg.loss_weights();
    let mut log_file = fs::OpenOptions::new().append(true).open(&log_path).map_err(|e| AppError::io(&log_path, e))?;
    let mut losses = Vec::new();
    let every = cfg.training.checkpoint_every;
    let log_every = cfg.training.log_every.max(1);
    while state.step < total {
        if opts.interrupt.as_ref().is_some_and(|f| f.load(Ordering::SeqCst)) {
            checkpoint::save(&ck_path, &state, cfg)?;
            return Err(AppError::Interrupted {
                step: state.step,
                checkpoint: ck_path.display().to_string(),
            });
        }
        let batch = sample_batch(&crops, cfg.training.batch_size, &mut state.rng)?;
        let l = match train_step(&mut state, &batch, phi, &weights) {
            Ok(l) => l,
            Err(e @ CoreError::NonFinite { .. }) => {
                let diag = out.join("nonfinite.json");
                let snapshot = serde_json::json!({
                    "error": e.to_string(),
                    "step": state.step + 1,
                    "last_losses": losses.last().map(format_row),
                    "batch_image_finite": batch.images.all_finite(),
                    "batch_map_finite": batch.maps.all_finite(),
                });
                io::write_json(&diag, &snapshot)?;
                return Err(AppError::Numeric(format!("{e}; diagnostic snapshot in {}", diag.display())));
            }
            Err(e) => return Err(AppError::core("training step", e)),
        };
        if l.step % log_every == 0 {
            writeln!(log_file, "{}", format_row(&l)).map_err(|e| AppError::io(&log_path, e))?;
        }
        if l.step % 100 == 0 {
            log::info!(
                "step {}: d={:.4} adv={:.4} content={:.5} feature={:.5}",
                l.step,
                l.d_loss,
                l.g_adv,
                l.content,
                l.feature
            );
        }
        losses.push(l);
        if every > 0 && state.step % every == 0 && state.step < total {
            checkpoint::save(&ck_path, &state, cfg)?;
        }
    }
    log_file.flush().map_err(|e| AppError::io(&log_path, e))?;
    checkpoint::save(&ck_path, &state, cfg)?;
    Ok(TrainOutcome {
        state,
        checkpoint: ck_path,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use textloc_core::dataset::{synth_document, SyntheticDocSpec};

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::default();
        let g = &mut cfg.network.generator;
        g.base_channels = 4;
        g.num_res_blocks = 1;
        g.expand_channels = 4;
        let d = &mut cfg.network.discriminator;
        d.first_channels = 4;
        d.ladder = vec![[4, 2], [8, 2]];
        d.dense_units = 8;
        cfg.training.crop = 32;
        cfg.training.crops_per_image = 2;
        cfg.training.batch_size = 2;
        cfg.training.total_steps = 3;
        cfg.preprocess.short_axis_target = 128;
        cfg
    }

    #[test]
    fn interrupt_checkpoints_and_resume_finishes() {
        let cfg = tiny();
        let doc = synth_document(&SyntheticDocSpec { seed: 2, ..Default::default() }).unwrap();
        let pair = crate::data::make_pair("doc", &doc.image, &doc.boxes, &crate::fewshot::pair_config(&cfg)).unwrap();
        let mut phi = FeatureNet::random(0);
        let dir = tempfile::tempdir().unwrap();

        let flag = Arc::new(AtomicBool::new(true));
        let opts = TrainOptions {
            interrupt: Some(flag),
            ..Default::default()
        };
        match train_loop(&cfg, &[pair.clone()], &mut phi, dir.path(), &opts) {
            Err(e @ AppError::Interrupted { step: 0, .. }) => assert_eq!(e.exit_code(), 130),
            other => panic!("expected an interruption, got {other:?}"),
        }
        let ck = dir.path().join(CHECKPOINT_FILE);
        assert_eq!(checkpoint::read_manifest(&ck).unwrap().step, 0);

        let opts = TrainOptions {
            resume: Some(ck),
            ..Default::default()
        };
        let done = train_loop(&cfg, &[pair], &mut phi, dir.path(), &opts).unwrap();
        assert_eq!(done.state.step, 3);
        assert_eq!(fs::read_to_string(dir.path().join(LOSS_FILE)).unwrap().lines().count(), 4);
    }
}
