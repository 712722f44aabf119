//! Domain types shared by every stage of the pipeline: images, masks, loss
//! weights, the run configuration and the persisted run report.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest side the depth-5 generator can process.
pub const MIN_TRAIN_SIDE: usize = 32;

/// An RGB image with values in `[0, 1]`, stored planar (channel-major).
#[derive(Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl fmt::Debug for ImageTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageTensor")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl ImageTensor {
    pub const CHANNELS: usize = 3;

    /// Builds an image from planar `[3, H, W]` data.
    pub fn from_planar(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Image(format!("empty image {height}x{width}")));
        }
        if data.len() != Self::CHANNELS * height * width {
            return Err(Error::dims(
                format!("{} values", Self::CHANNELS * height * width),
                format!("{} values", data.len()),
            ));
        }
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::Image(format!("value {v} at index {i} outside [0,1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds an image from interleaved `[H, W, 3]` data.
    pub fn from_interleaved(height: usize, width: usize, hwc: &[f32]) -> Result<Self> {
        if hwc.len() != Self::CHANNELS * height * width {
            return Err(Error::dims(
                format!("{} values", Self::CHANNELS * height * width),
                format!("{} values", hwc.len()),
            ));
        }
        let plane = height * width;
        let mut data = vec![0.0; hwc.len()];
        for (p, px) in hwc.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + p] = px[c];
            }
        }
        Self::from_planar(height, width, data)
    }

    /// Clamps arbitrary values into range. Non-finite values become 0.
    pub fn from_planar_clamped(height: usize, width: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self::from_planar(height, width, data)
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::from_planar(height, width, vec![value; Self::CHANNELS * height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_planar(&self) -> &[f32] {
        &self.data
    }

    pub fn into_planar(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn to_interleaved(&self) -> Vec<f32> {
        let plane = self.height * self.width;
        let mut out = vec![0.0; self.data.len()];
        for p in 0..plane {
            for c in 0..3 {
                out[p * 3 + c] = self.data[c * plane + p];
            }
        }
        out
    }

    /// Fails unless both sides are large enough for the generator.
    pub fn ensure_trainable(&self) -> Result<()> {
        if self.height < MIN_TRAIN_SIDE || self.width < MIN_TRAIN_SIDE {
            return Err(Error::Image(format!(
                "{}x{} is below the {MIN_TRAIN_SIDE}x{MIN_TRAIN_SIDE} minimum",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

/// Where a mask came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Outpaint,
    Random,
    File,
    WordcloudFile,
    None,
}

/// Binary mask; 1 marks a known pixel and 0 a missing one.
#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<u8>,
    kind: MaskKind,
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mask")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("kind", &self.kind)
            .field("zeros", &self.zero_count())
            .finish()
    }
}

impl Mask {
    pub fn from_bits(height: usize, width: usize, bits: Vec<u8>, kind: MaskKind) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::dims(
                format!("{} mask entries", height * width),
                format!("{}", bits.len()),
            ));
        }
        if let Some(v) = bits.iter().find(|b| **b > 1) {
            return Err(Error::Mask(format!("entry {v} is not 0 or 1")));
        }
        Ok(Self {
            height,
            width,
            bits,
            kind,
        })
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![1; height * width],
            kind: MaskKind::None,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![0; height * width],
            kind: MaskKind::File,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn is_known(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x] == 1
    }

    pub fn zero_count(&self) -> usize {
        self.bits.iter().filter(|b| **b == 0).count()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.zero_count() as f64 / self.bits.len() as f64
    }

    /// Elementwise AND: a pixel is known only if known in both masks.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.dims() != other.dims() {
            return Err(Error::dims(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a & b)
            .collect();
        Ok(Mask {
            height: self.height,
            width: self.width,
            bits,
            kind: self.kind,
        })
    }

    pub(crate) fn with_kind(mut self, kind: MaskKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Coefficients composing the total objective.
///
/// `lambda_cyc` only applies to the resize task, where the cycle term takes
/// the place of the masked pixel loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_g: f64,
    pub lambda_r: f64,
    pub lambda_cal: f64,
    pub lambda_cvl: f64,
    pub lambda_cyc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_g: defaults::lambda_g(),
            lambda_r: 1.0,
            lambda_cal: defaults::lambda_cal(),
            lambda_cvl: defaults::lambda_cvl(),
            lambda_cyc: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_G", self.lambda_g),
            ("lambda_R", self.lambda_r),
            ("lambda_cal", self.lambda_cal),
            ("lambda_cvl", self.lambda_cvl),
            ("lambda_cyc", self.lambda_cyc),
        ];
        for (name, v) in all {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if all[..4].iter().all(|(_, v)| *v == 0.0) {
            return Err(Error::Config(
                "at least one of lambda_G, lambda_R, lambda_cal, lambda_cvl must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Effective weight of the adversarial generator term inside the total.
    pub fn adversarial_weight(&self) -> f64 {
        self.lambda_g * self.lambda_cal
    }

    /// Effective weight of the contextual term inside the total.
    pub fn contextual_weight(&self) -> f64 {
        self.lambda_g * self.lambda_cvl
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Outpaint,
    Inpaint,
    RestoreRandom,
    RestoreWordcloud,
    Resize,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::Outpaint => "outpaint",
            Task::Inpaint => "inpaint",
            Task::RestoreRandom => "restore_random",
            Task::RestoreWordcloud => "restore_wordcloud",
            Task::Resize => "resize",
        };
        f.write_str(s)
    }
}

/// Weight source for the perceptual backbone.
pub const RANDOM_BACKBONE: &str = "random";

/// Full description of one experiment. Serialized as a flat TOML document
/// whose keys are the field names below, with the loss weights inlined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatConfig", into = "FlatConfig")]
pub struct RunConfig {
    pub task: Task,
    pub mask_fraction: Option<f64>,
    pub mask_path: Option<PathBuf>,
    pub iterations: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
    pub discriminator_scales: Option<usize>,
    pub cx_layer: String,
    pub cx_bandwidth: f64,
    pub cx_epsilon: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub betas_g: [f64; 2],
    pub betas_d: [f64; 2],
    pub resize_factor: Option<[f64; 2]>,
    pub composite_output: bool,
    pub emit_best: bool,
    pub metrics_on_composite: bool,
    /// Appends the mask as a fourth generator input channel.
    pub mask_input_channel: bool,
    /// Drops source features from mostly-missing cells out of the CX pool.
    pub cvl_exclude_masked: bool,
    pub generator_widths: [usize; 5],
    pub discriminator_width: usize,
    /// Path to a backbone weight file, or `"random"` for the seeded
    /// stand-in. Empty means: look up the weights cache directory.
    pub backbone_weights: String,
}

/// On-disk shape of [`RunConfig`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatConfig {
    task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_path: Option<PathBuf>,
    #[serde(default = "defaults::iterations")]
    iterations: usize,
    #[serde(default)]
    seed: i64,
    #[serde(rename = "lambda_G", default = "defaults::lambda_g")]
    lambda_g: f64,
    #[serde(rename = "lambda_R", default = "defaults::one")]
    lambda_r: f64,
    #[serde(default = "defaults::lambda_cal")]
    lambda_cal: f64,
    #[serde(default = "defaults::lambda_cvl")]
    lambda_cvl: f64,
    #[serde(default = "defaults::one")]
    lambda_cyc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discriminator_scales: Option<usize>,
    #[serde(default = "defaults::cx_layer")]
    cx_layer: String,
    #[serde(default = "defaults::cx_bandwidth")]
    cx_bandwidth: f64,
    #[serde(default = "defaults::cx_epsilon")]
    cx_epsilon: f64,
    #[serde(default = "defaults::lr")]
    lr_g: f64,
    #[serde(default = "defaults::lr")]
    lr_d: f64,
    #[serde(default = "defaults::betas")]
    betas_g: [f64; 2],
    #[serde(default = "defaults::betas")]
    betas_d: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resize_factor: Option<[f64; 2]>,
    #[serde(default)]
    composite_output: bool,
    #[serde(default)]
    emit_best: bool,
    #[serde(default)]
    metrics_on_composite: bool,
    #[serde(default)]
    mask_input_channel: bool,
    #[serde(default)]
    cvl_exclude_masked: bool,
    #[serde(default = "defaults::generator_widths")]
    generator_widths: [usize; 5],
    #[serde(default = "defaults::discriminator_width")]
    discriminator_width: usize,
    #[serde(default)]
    backbone_weights: String,
}

impl TryFrom<FlatConfig> for RunConfig {
    type Error = String;

    fn try_from(f: FlatConfig) -> std::result::Result<Self, String> {
        let seed = u64::try_from(f.seed).map_err(|_| format!("seed {} is negative", f.seed))?;
        Ok(Self {
            task: f.task,
            mask_fraction: f.mask_fraction,
            mask_path: f.mask_path,
            iterations: f.iterations,
            seed,
            loss_weights: LossWeights {
                lambda_g: f.lambda_g,
                lambda_r: f.lambda_r,
                lambda_cal: f.lambda_cal,
                lambda_cvl: f.lambda_cvl,
                lambda_cyc: f.lambda_cyc,
            },
            discriminator_scales: f.discriminator_scales,
            cx_layer: f.cx_layer,
            cx_bandwidth: f.cx_bandwidth,
            cx_epsilon: f.cx_epsilon,
            lr_g: f.lr_g,
            lr_d: f.lr_d,
            betas_g: f.betas_g,
            betas_d: f.betas_d,
            resize_factor: f.resize_factor,
            composite_output: f.composite_output,
            emit_best: f.emit_best,
            metrics_on_composite: f.metrics_on_composite,
            mask_input_channel: f.mask_input_channel,
            cvl_exclude_masked: f.cvl_exclude_masked,
            generator_widths: f.generator_widths,
            discriminator_width: f.discriminator_width,
            backbone_weights: f.backbone_weights,
        })
    }
}

impl From<RunConfig> for FlatConfig {
    fn from(c: RunConfig) -> Self {
        Self {
            task: c.task,
            mask_fraction: c.mask_fraction,
            mask_path: c.mask_path,
            iterations: c.iterations,
            // Seeds above i64::MAX are rejected by validate_config.
            seed: c.seed as i64,
            lambda_g: c.loss_weights.lambda_g,
            lambda_r: c.loss_weights.lambda_r,
            lambda_cal: c.loss_weights.lambda_cal,
            lambda_cvl: c.loss_weights.lambda_cvl,
            lambda_cyc: c.loss_weights.lambda_cyc,
            discriminator_scales: c.discriminator_scales,
            cx_layer: c.cx_layer,
            cx_bandwidth: c.cx_bandwidth,
            cx_epsilon: c.cx_epsilon,
            lr_g: c.lr_g,
            lr_d: c.lr_d,
            betas_g: c.betas_g,
            betas_d: c.betas_d,
            resize_factor: c.resize_factor,
            composite_output: c.composite_output,
            emit_best: c.emit_best,
            metrics_on_composite: c.metrics_on_composite,
            mask_input_channel: c.mask_input_channel,
            cvl_exclude_masked: c.cvl_exclude_masked,
            generator_widths: c.generator_widths,
            discriminator_width: c.discriminator_width,
            backbone_weights: c.backbone_weights,
        }
    }
}

mod defaults {
    pub fn one() -> f64 {
        1.0
    }
    // The feature terms are kept small next to the per-pixel mean squared
    // error; larger values let them override the known pixels.
    pub fn lambda_g() -> f64 {
        0.02
    }
    pub fn lambda_cal() -> f64 {
        0.01
    }
    pub fn lambda_cvl() -> f64 {
        0.1
    }
    pub fn iterations() -> usize {
        4000
    }
    pub fn cx_layer() -> String {
        "conv4_2".into()
    }
    pub fn cx_bandwidth() -> f64 {
        0.5
    }
    pub fn cx_epsilon() -> f64 {
        1e-5
    }
    pub fn lr() -> f64 {
        1e-4
    }
    pub fn betas() -> [f64; 2] {
        [0.5, 0.999]
    }
    pub fn generator_widths() -> [usize; 5] {
        [32, 64, 128, 256, 256]
    }
    pub fn discriminator_width() -> usize {
        64
    }
}

pub const DEFAULT_DISCRIMINATOR_SCALES: usize = 3;

impl RunConfig {
    /// A configuration with every default filled in for `task`.
    pub fn new(task: Task) -> Self {
        Self {
            task,
            mask_fraction: None,
            mask_path: None,
            iterations: defaults::iterations(),
            seed: 0,
            loss_weights: LossWeights::default(),
            discriminator_scales: None,
            cx_layer: defaults::cx_layer(),
            cx_bandwidth: defaults::cx_bandwidth(),
            cx_epsilon: defaults::cx_epsilon(),
            lr_g: defaults::lr(),
            lr_d: defaults::lr(),
            betas_g: defaults::betas(),
            betas_d: defaults::betas(),
            resize_factor: None,
            composite_output: false,
            emit_best: false,
            metrics_on_composite: false,
            mask_input_channel: false,
            cvl_exclude_masked: false,
            generator_widths: defaults::generator_widths(),
            discriminator_width: defaults::discriminator_width(),
            backbone_weights: String::new(),
        }
    }

    /// Backbone layers feeding the context terms; `cx_layer` may list
    /// several, comma separated. The first also feeds the discriminator.
    pub fn cx_layers(&self) -> Vec<String> {
        self.cx_layer
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn scales(&self) -> usize {
        self.discriminator_scales
            .unwrap_or(DEFAULT_DISCRIMINATOR_SCALES)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Checks a configuration and fills in defaults. Idempotent.
pub fn validate_config(config: RunConfig) -> Result<RunConfig> {
    match config.task {
        Task::Outpaint | Task::RestoreRandom => {
            if config.mask_fraction.is_none() {
                return Err(Error::Config(format!("mask_fraction required for {}", config.task)));
            }
        }
        Task::Inpaint | Task::RestoreWordcloud => {
            if config.mask_path.is_none() {
                return Err(Error::Config(format!("mask file required for {}", config.task)));
            }
        }
        Task::Resize => {}
    }
    validate_training(config)
}

/// Like [`validate_config`] but without requiring the mask source of
/// restoration tasks, for callers that supply the mask themselves.
pub fn validate_training(mut config: RunConfig) -> Result<RunConfig> {
    if config.iterations == 0 {
        return Err(Error::Config("iterations must be positive".into()));
    }
    if config.seed > i64::MAX as u64 {
        return Err(Error::Config(format!("seed {} exceeds {}", config.seed, i64::MAX)));
    }
    if let Some(f) = config.mask_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("mask_fraction {f}: fraction out of range (0,1)")));
        }
    }
    if config.task == Task::Resize {
        match config.resize_factor {
            None => return Err(Error::Config("resize_factor required for resize".into())),
            Some([sx, sy]) => {
                if !(sx.is_finite() && sy.is_finite() && sx > 0.0 && sy > 0.0) {
                    return Err(Error::Config(format!(
                        "resize_factor ({sx}, {sy}) must be positive"
                    )));
                }
            }
        }
        if config.mask_input_channel {
            return Err(Error::Config("mask_input_channel does not apply to resize".into()));
        }
    }
    config.loss_weights.validate()?;
    let scales = config.discriminator_scales.unwrap_or(DEFAULT_DISCRIMINATOR_SCALES);
    if scales == 0 {
        return Err(Error::Config("discriminator_scales must be >= 1".into()));
    }
    config.discriminator_scales = Some(scales);
    if !(config.cx_bandwidth.is_finite() && config.cx_bandwidth > 0.0) {
        return Err(Error::Config("cx_bandwidth must be > 0".into()));
    }
    if !(config.cx_epsilon.is_finite() && config.cx_epsilon > 0.0) {
        return Err(Error::Config("cx_epsilon must be > 0".into()));
    }
    if config.cx_layers().is_empty() {
        return Err(Error::Config("cx_layer must name a backbone layer".into()));
    }
    for (name, lr) in [("lr_g", config.lr_g), ("lr_d", config.lr_d)] {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Config(format!("{name} must be > 0")));
        }
    }
    for (name, [b1, b2]) in [("betas_g", config.betas_g), ("betas_d", config.betas_d)] {
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Config(format!("{name} must lie in [0,1)")));
        }
    }
    if config.generator_widths.contains(&0) || config.discriminator_width == 0 {
        return Err(Error::Config("network widths must be positive".into()));
    }
    Ok(config)
}

/// One row of the loss trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub tl: f64,
    pub cfl: f64,
    pub cal_g: f64,
    pub cal_d: f64,
    pub cvl: f64,
    pub rl: f64,
    /// Cycle-consistency term; zero outside the resize task.
    #[serde(default)]
    pub cyc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub psnr: f64,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masked_ssim: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restored: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composite: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

/// Persisted outcome of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub iterations: usize,
    pub trace: Vec<LossBreakdown>,
    /// Metrics of the raw generator output against ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<QualityMetrics>,
    /// Metrics of the composited output against ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composite_metrics: Option<QualityMetrics>,
    pub mask_zero_fraction: f64,
    pub best_tl: f64,
    pub best_iteration: usize,
    /// False when the loss weights disable every feature-space term, in which
    /// case the backbone and discriminator are not evaluated.
    pub feature_terms_evaluated: bool,
    pub wall_seconds: f64,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl RunReport {
    /// Metrics on whichever output the configuration designates.
    pub fn headline_metrics(&self) -> Option<QualityMetrics> {
        if self.config.metrics_on_composite {
            self.composite_metrics
        } else {
            self.metrics
        }
    }
}
