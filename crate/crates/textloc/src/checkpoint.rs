//! Training checkpoints: one safetensors archive holding generator,
//! discriminator and optimizer arrays, plus a JSON manifest stored under the
//! archive's single metadata key. The manifest carries no timestamps, so
//! equal states serialize to equal bytes.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use serde::{Deserialize, Serialize};
use textloc_core::nn::{Network, Param};
use textloc_core::train::{Adam, TrainState};

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::io;

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST_KEY: &str = "manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub step: u64,
    pub opt_g_t: u64,
    pub opt_d_t: u64,
    /// Batch-sampling stream position.
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: String,
    pub config: RunConfig,
}

fn f32_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn collect_params(prefix: &str, params: Vec<&Param<f32>>, opt: &Adam<f32>, out: &mut Vec<(String, Vec<usize>, Vec<u8>)>) {
    let mut slot = 0;
    for p in params {
        out.push((format!("{prefix}/{}", p.name), p.shape.clone(), f32_bytes(&p.value)));
        if p.trainable {
            out.push((format!("opt_{prefix}/m/{}", p.name), p.shape.clone(), f32_bytes(&opt.m[slot])));
            out.push((format!("opt_{prefix}/v/{}", p.name), p.shape.clone(), f32_bytes(&opt.v[slot])));
            slot += 1;
        }
    }
}

/// Serializes a training state together with the config that built it.
pub fn to_bytes(state: &TrainState<f32>, cfg: &RunConfig) -> AppResult<Vec<u8>> {
    let mut arrays = Vec::new();
    collect_params("g", state.generator.params(), &state.opt_g, &mut arrays);
    collect_params("d", state.discriminator.params(), &state.opt_d, &mut arrays);
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        step: state.step,
        opt_g_t: state.opt_g.t,
        opt_d_t: state.opt_d.t,
        rng_seed: state.rng.get_seed(),
        rng_stream: state.rng.get_stream(),
        rng_word_pos: state.rng.get_word_pos().to_string(),
        config: cfg.clone(),
    };
    let meta = HashMap::from([(MANIFEST_KEY.to_string(), serde_json::to_string(&manifest).expect("manifest serializes"))]);
    let views = arrays
        .iter()
        .map(|(name, shape, bytes)| Ok((name.clone(), TensorView::new(Dtype::F32, shape.clone(), bytes)?)))
        .collect::<Result<Vec<_>, safetensors::SafeTensorError>>()
        .map_err(|e| AppError::data(format!("checkpoint encoding: {e}")))?;
    safetensors::serialize(views, &Some(meta)).map_err(|e| AppError::data(format!("checkpoint encoding: {e}")))
}

pub fn save(path: &Path, state: &TrainState<f32>, cfg: &RunConfig) -> AppResult<()> {
    io::write_atomic(path, &to_bytes(state, cfg)?)
}

/// Reads only the manifest of a checkpoint.
pub fn read_manifest(path: &Path) -> AppResult<CheckpointManifest> {
    let bytes = io::read_bytes(path)?;
    manifest_of(path, &bytes)
}

fn manifest_of(path: &Path, bytes: &[u8]) -> AppResult<CheckpointManifest> {
    let (_, meta) = SafeTensors::read_metadata(bytes).map_err(|e| AppError::io(path, e))?;
    let text = meta
        .metadata()
        .as_ref()
        .and_then(|m| m.get(MANIFEST_KEY))
        .ok_or_else(|| AppError::data(format!("{}: checkpoint has no manifest", path.display())))?;
    let m: CheckpointManifest = serde_json::from_str(text).map_err(|e| AppError::io(path, e))?;
    if m.format_version != FORMAT_VERSION {
        return Err(AppError::data(format!(
            "{}: unsupported checkpoint format {}",
            path.display(),
            m.format_version
        )));
    }
    Ok(m)
}

fn read_f32(path: &Path, st: &SafeTensors, name: &str, shape: &[usize]) -> AppResult<Vec<f32>> {
    let t = st
        .tensor(name)
        .map_err(|_| AppError::data(format!("{}: missing array `{name}`", path.display())))?;
    if t.dtype() != Dtype::F32 || t.shape() != shape {
        return Err(AppError::data(format!(
            "{}: array `{name}` has shape {:?}, expected {shape:?}",
            path.display(),
            t.shape()
        )));
    }
    Ok(t.data().chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn restore_params(path: &Path, st: &SafeTensors, prefix: &str, params: Vec<&mut Param<f32>>, opt: &mut Adam<f32>) -> AppResult<()> {
    let mut slot = 0;
    for p in params {
        p.value = read_f32(path, st, &format!("{prefix}/{}", p.name), &p.shape)?;
        if p.trainable {
            opt.m[slot] = read_f32(path, st, &format!("opt_{prefix}/m/{}", p.name), &p.shape)?;
            opt.v[slot] = read_f32(path, st, &format!("opt_{prefix}/v/{}", p.name), &p.shape)?;
            slot += 1;
        }
    }
    Ok(())
}

/// Rebuilds the training state stored at `path`. The networks are rebuilt
/// from the checkpoint's own config, which is returned alongside.
pub fn load(path: &Path) -> AppResult<(TrainState<f32>, CheckpointManifest)> {
    let bytes = io::read_bytes(path)?;
    let manifest = manifest_of(path, &bytes)?;
    let cfg = &manifest.config;
    let mut state = TrainState::<f32>::new(cfg.generator(), cfg.discriminator(), cfg.adam(), cfg.seed).map_err(|e| AppError::core(path.display(), e))?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| AppError::io(path, e))?;
    restore_params(path, &st, "g", state.generator.params_mut(), &mut state.opt_g)?;
    restore_params(path, &st, "d", state.discriminator.params_mut(), &mut state.opt_d)?;
    state.step = manifest.step;
    state.opt_g.t = manifest.opt_g_t;
    state.opt_d.t = manifest.opt_d_t;
    let word_pos: u128 = manifest.rng_word_pos.parse().map_err(|e| AppError::io(path, e))?;
    let mut rng = ChaCha8Rng::from_seed(manifest.rng_seed);
    rng.set_stream(manifest.rng_stream);
    rng.set_word_pos(word_pos);
    state.rng = rng;
    Ok((state, manifest))
}
