//! Run configuration file. Every field is optional; omitted fields take the
//! defaults below, which reproduce the full-scale training setup. Unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use textloc_core::imaging::{ComponentMethod, PostprocessParams, PreprocessParams};
use textloc_core::maps::{Composition, DEFAULT_SIGMA_RATIO};
use textloc_core::nn::{DiscriminatorConfig, GeneratorConfig};
use textloc_core::train::{AdamConfig, LossWeights};
use textloc_core::MatchParams;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub preprocess: PreprocessSection,
    pub map: MapSection,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub postprocess: PostprocessSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub short_axis_target: usize,
    pub lo_frac: f64,
    pub hi_frac: f64,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let p = PreprocessParams::default();
        Self {
            short_axis_target: p.short_axis_target,
            lo_frac: p.lo_frac,
            hi_frac: p.hi_frac,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompositionName {
    #[default]
    Max,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub sigma_ratio: f64,
    pub composition: CompositionName,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            sigma_ratio: DEFAULT_SIGMA_RATIO,
            composition: CompositionName::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub generator: GeneratorSection,
    pub discriminator: DiscriminatorSection,
    pub feature: FeatureSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub in_channels: usize,
    pub base_channels: usize,
    pub num_res_blocks: usize,
    pub head_kernel: usize,
    pub block_kernel: usize,
    pub stride: usize,
    pub expand_channels: usize,
    pub out_channels: usize,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            in_channels: g.in_channels,
            base_channels: g.base_channels,
            num_res_blocks: g.num_res_blocks,
            head_kernel: g.head_kernel,
            block_kernel: g.block_kernel,
            stride: g.stride,
            expand_channels: g.expand_channels,
            out_channels: g.out_channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorSection {
    pub first_channels: usize,
    /// `[channels, stride]` per block.
    pub ladder: Vec<[usize; 2]>,
    pub kernel: usize,
    pub leaky_slope: f64,
    pub dense_units: usize,
}

impl Default for DiscriminatorSection {
    fn default() -> Self {
        let d = DiscriminatorConfig::default();
        Self {
            first_channels: d.first_channels,
            ladder: d.ladder.iter().map(|&(c, s)| [c, s]).collect(),
            kernel: d.kernel,
            leaky_slope: d.leaky_slope,
            dense_units: d.dense_units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// Safetensors file with `block{1,2,3}_conv*.{kernel,bias}` entries.
    pub weights: Option<PathBuf>,
    /// Use seeded random frozen weights when `weights` is unset or unusable.
    pub fallback: bool,
    pub fallback_seed: u64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            weights: None,
            fallback: true,
            fallback_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub total_steps: u64,
    pub crop: usize,
    pub crops_per_image: usize,
    pub checkpoint_every: u64,
    pub log_every: u64,
    pub loss: LossSection,
    pub optimizer: OptimizerSection,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            batch_size: 8,
            total_steps: 120_000,
            crop: 128,
            crops_per_image: 100,
            checkpoint_every: 5_000,
            log_every: 1,
            loss: LossSection::default(),
            optimizer: OptimizerSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub q: f64,
    pub r: f64,
    pub adv: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let w = LossWeights::default();
        Self { q: w.q, r: w.r, adv: w.adv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    BorderFollowing,
    Labeling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessSection {
    pub threshold: f64,
    pub dilation_kernel: [usize; 2],
    pub dilation_iters: usize,
    pub min_box_area_px: usize,
    pub method: MethodName,
}

impl Default for PostprocessSection {
    fn default() -> Self {
        let p = PostprocessParams::default();
        Self {
            threshold: p.threshold,
            dilation_kernel: [p.dilation_kernel.0, p.dilation_kernel.1],
            dilation_iters: p.dilation_iters,
            min_box_area_px: p.min_box_area_px,
            method: MethodName::BorderFollowing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub iou_threshold: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            iou_threshold: MatchParams::default().iou_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &str) -> AppResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| AppError::usage(format!("{origin}: {e}")))?;
        cfg.validate().map_err(|e| AppError::usage(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        let t = &self.training;
        if t.batch_size == 0 || t.crop == 0 || t.crops_per_image == 0 {
            return Err("training.batch_size, crop and crops_per_image must be >= 1".into());
        }
        if t.crop % self.network.generator.stride.max(1) != 0 {
            return Err("training.crop must be a multiple of network.generator.stride".into());
        }
        self.generator().validate().map_err(|e| format!("network.generator: {e}"))?;
        self.loss_weights().validate().map_err(|e| format!("training.loss: {e}"))?;
        self.adam().validate().map_err(|e| format!("training.optimizer: {e}"))?;
        self.postprocess_params().validate().map_err(|e| format!("postprocess: {e}"))?;
        if !(self.map.sigma_ratio > 0.0) {
            return Err("map.sigma_ratio must be > 0".into());
        }
        let iou = self.eval.iou_threshold;
        if !(iou > 0.0 && iou <= 1.0) {
            return Err("eval.iou_threshold must lie in (0, 1]".into());
        }
        let pre = &self.preprocess;
        if pre.short_axis_target == 0 || !(pre.lo_frac >= 0.0 && pre.lo_frac < pre.hi_frac) {
            return Err("preprocess needs short_axis_target >= 1 and 0 <= lo_frac < hi_frac".into());
        }
        let min_map = self.discriminator().reduction();
        if t.crop / self.network.generator.stride.max(1) < min_map {
            return Err(format!("training.crop / stride must be at least the discriminator reduction {min_map}"));
        }
        Ok(())
    }

    pub fn preprocess_params(&self) -> PreprocessParams {
        PreprocessParams {
            short_axis_target: self.preprocess.short_axis_target,
            lo_frac: self.preprocess.lo_frac,
            hi_frac: self.preprocess.hi_frac,
        }
    }

    pub fn composition(&self) -> Composition {
        match self.map.composition {
            CompositionName::Max => Composition::Max,
            CompositionName::Sum => Composition::Sum,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        let g = &self.network.generator;
        GeneratorConfig {
            in_channels: g.in_channels,
            base_channels: g.base_channels,
            num_res_blocks: g.num_res_blocks,
            head_kernel: g.head_kernel,
            block_kernel: g.block_kernel,
            stride: g.stride,
            expand_channels: g.expand_channels,
            out_channels: g.out_channels,
        }
    }

    pub fn discriminator(&self) -> DiscriminatorConfig {
        let d = &self.network.discriminator;
        DiscriminatorConfig {
            in_channels: self.network.generator.out_channels,
            first_channels: d.first_channels,
            ladder: d.ladder.iter().map(|&[c, s]| (c, s)).collect(),
            kernel: d.kernel,
            leaky_slope: d.leaky_slope,
            dense_units: d.dense_units,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        let l = &self.training.loss;
        LossWeights { q: l.q, r: l.r, adv: l.adv }
    }

    pub fn adam(&self) -> AdamConfig {
        let o = &self.training.optimizer;
        AdamConfig {
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
        }
    }

    pub fn postprocess_params(&self) -> PostprocessParams {
        let p = &self.postprocess;
        PostprocessParams {
            threshold: p.threshold,
            dilation_kernel: (p.dilation_kernel[0], p.dilation_kernel[1]),
            dilation_iters: p.dilation_iters,
            min_box_area_px: p.min_box_area_px,
            method: match p.method {
                MethodName::BorderFollowing => ComponentMethod::BorderFollowing,
                MethodName::Labeling => ComponentMethod::Labeling,
            },
        }
    }

    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            iou_threshold: self.eval.iou_threshold,
        }
    }

    /// Scale of target maps relative to the preprocessed image.
    pub fn map_scale(&self) -> f64 {
        1.0 / self.network.generator.stride as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_json("{}", "inline").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.training.total_steps, 120_000);
        assert_eq!(cfg.training.batch_size, 8);
        assert_eq!(cfg.training.optimizer.lr, 2e-4);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json(r#"{"training": {"batch": 4}}"#, "c.json").unwrap_err();
        assert!(matches!(err, AppError::Usage(ref m) if m.contains("c.json") && m.contains("batch")));
        assert!(RunConfig::from_json(r#"{"trainig": {}}"#, "c.json").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_json(r#"{"training": {"crop": 66}}"#, "c").is_err());
        assert!(RunConfig::from_json(r#"{"postprocess": {"threshold": 1.5}}"#, "c").is_err());
        assert!(RunConfig::from_json(r#"{"training": {"loss": {"r": -1}}}"#, "c").is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = RunConfig::default();
        cfg.training.total_steps = 17;
        cfg.network.feature.weights = Some("vgg.safetensors".into());
        assert_eq!(RunConfig::from_json(&cfg.to_json(), "x").unwrap(), cfg);
    }
}
