//! Run configuration: one typed struct addressed through dotted keys.
//!
//! Layering is defaults, then a preset or file, then individual `key=value`
//! overrides; every layer goes through [`RunConfig::set`], so unknown keys
//! and malformed values fail the same way everywhere. The fingerprint hashes
//! the full resolved key set, so two runs with equal fingerprints ran with
//! equal settings.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::augment::AugmentPolicy;
use crate::encoders::{SpatialArch, TemporalArch};
use crate::error::{Error, Result};
use crate::losses::{LossConfig, NtXentMode};
use crate::pipeline::{hex, sha256, Sampling, StageConfig, ViewConfig};
use crate::preprocess::PreprocessConfig;
use crate::synth::{OutlierKind, SynthConfig};

/// Which stages run before fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    TwoStage,
    SpatialOnly,
    TemporalOnly,
    None,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::TwoStage, Ablation::SpatialOnly, Ablation::TemporalOnly, Ablation::None];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::TwoStage => "two-stage",
            Ablation::SpatialOnly => "spatial-only",
            Ablation::TemporalOnly => "temporal-only",
            Ablation::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation `{s}` (two-stage, spatial-only, temporal-only, none)")))
    }

    pub fn spatial(self) -> bool {
        matches!(self, Ablation::TwoStage | Ablation::SpatialOnly)
    }

    pub fn temporal(self) -> bool {
        matches!(self, Ablation::TwoStage | Ablation::TemporalOnly)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub folds: usize,
    pub repeats: usize,
    pub ablation: Ablation,
    /// Pre-train once per fold on everything except that fold's videos.
    pub exclude_test_pixels_from_ssl: bool,
    /// Reuse frozen spatial embeddings of pooled views.
    pub cache_embeddings: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { folds: 5, repeats: 3, ablation: Ablation::TwoStage, exclude_test_pixels_from_ssl: false, cache_embeddings: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Corpus directory holding the manifest.
    pub data_dir: String,
    pub preprocess: PreprocessConfig,
    pub sampling: Sampling,
    pub view_pool: usize,
    pub augment: AugmentPolicy,
    pub spatial_arch: SpatialArch,
    pub temporal_arch: TemporalArch,
    pub head_hidden: usize,
    pub loss: LossConfig,
    pub spatial: StageConfig,
    pub temporal: StageConfig,
    pub finetune: StageConfig,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
}

/// A configuration key, what it means, and where its default comes from.
#[derive(Debug, Clone, Copy)]
pub struct KeyInfo {
    pub key: &'static str,
    pub help: &'static str,
    /// `method`: stated by the method; `desk`: scaled down for a laptop;
    /// `choice`: an implementation decision where the method is silent.
    pub provenance: &'static str,
}

const fn k(key: &'static str, provenance: &'static str, help: &'static str) -> KeyInfo {
    KeyInfo { key, help, provenance }
}

pub const KEYS: &[KeyInfo] = &[
    k("seed", "choice", "master seed; every random stream derives from it"),
    k("data.dir", "choice", "corpus directory containing manifest.tsv"),
    k("preprocess.resize_to", "method", "square frame size fed to the spatial encoder"),
    k("preprocess.clip_max_frames", "method", "frames kept from the start of each video"),
    k("preprocess.subsample_stride", "method", "temporal stride (uniform) or 1/fraction kept (random)"),
    k("preprocess.gradient_low_fraction", "choice", "drop frames whose gradient score is below this fraction of the median"),
    k("preprocess.gradient_high_multiplier", "choice", "drop frames whose gradient score exceeds this multiple of the median"),
    k("sampling.mode", "method", "uniform | random frame selection"),
    k("sampling.view_pool", "desk", "fixed augmented views per video (0 = fresh every epoch)"),
    k("augment.flip", "method", "random horizontal/vertical flips"),
    k("augment.rotation", "method", "random quarter turns"),
    k("augment.rotation_jitter_deg", "choice", "extra continuous rotation range in degrees (0 = off)"),
    k("augment.brightness", "method", "random brightness shift"),
    k("augment.brightness_max", "choice", "largest brightness shift"),
    k("augment.contrast", "method", "random contrast scaling"),
    k("augment.contrast_min", "choice", "smallest contrast factor"),
    k("augment.contrast_max", "choice", "largest contrast factor"),
    k("augment.noise", "method", "additive gaussian pixel noise"),
    k("augment.noise_sigma", "choice", "pixel noise standard deviation"),
    k("augment.temporally_consistent", "method", "one transform per view (true) or per frame (false)"),
    k("model.spatial", "method", "spatial encoder descriptor, e.g. vit(...) or conv(...)"),
    k("model.temporal", "method", "temporal encoder descriptor"),
    k("model.head_hidden", "choice", "hidden width of the viability head"),
    k("loss.lambda_var", "method", "weight of the variance term in the alignment loss"),
    k("loss.sigma2_floor", "choice", "lower bound on the alignment variance"),
    k("loss.tau", "method", "contrastive temperature"),
    k("loss.huber_delta", "method", "Huber threshold for fine-tuning"),
    k("loss.normalize_by_length", "choice", "average alignment loss over anchors instead of summing"),
    k("loss.ntxent_mode", "choice", "literal | symmetric contrastive anchors"),
    k("stage.spatial.epochs", "method", "spatial pre-training epochs"),
    k("stage.spatial.batch_size", "method", "videos per spatial update"),
    k("stage.spatial.n_views", "method", "augmented views per video for alignment"),
    k("stage.spatial.learning_rate", "method", "Adam learning rate"),
    k("stage.spatial.weight_decay", "method", "L2 weight decay"),
    k("stage.spatial.decoupled_weight_decay", "choice", "decoupled (AdamW) instead of L2 decay"),
    k("stage.temporal.epochs", "method", "temporal pre-training epochs"),
    k("stage.temporal.batch_size", "method", "videos per contrastive batch"),
    k("stage.temporal.learning_rate", "method", "Adam learning rate"),
    k("stage.temporal.weight_decay", "method", "L2 weight decay"),
    k("stage.temporal.decoupled_weight_decay", "choice", "decoupled (AdamW) instead of L2 decay"),
    k("stage.finetune.epochs", "method", "fine-tuning epochs"),
    k("stage.finetune.batch_size", "method", "videos per fine-tuning update"),
    k("stage.finetune.learning_rate", "method", "Adam learning rate"),
    k("stage.finetune.weight_decay", "method", "L2 weight decay"),
    k("stage.finetune.decoupled_weight_decay", "choice", "decoupled (AdamW) instead of L2 decay"),
    k("stage.finetune.augment", "choice", "augment videos during fine-tuning"),
    k("eval.folds", "method", "cross-validation folds"),
    k("eval.repeats", "desk", "repeated runs with derived seeds"),
    k("eval.ablation", "method", "two-stage | spatial-only | temporal-only | none"),
    k("eval.exclude_test_pixels_from_ssl", "choice", "pre-train per fold without that fold's videos"),
    k("eval.cache_embeddings", "desk", "cache frozen spatial embeddings of pooled views"),
    k("synth.n_videos", "desk", "synthetic corpus size"),
    k("synth.frame_size", "desk", "synthetic frame side in pixels"),
    k("synth.length_min", "desk", "shortest synthetic video"),
    k("synth.length_max", "desk", "longest synthetic video"),
    k("synth.outlier_rate", "choice", "fraction of frames replaced by outliers"),
    k("synth.outlier_kinds", "choice", "comma list of blank, low_exposure, blur, off_center, debris"),
    k("synth.label_fraction", "desk", "fraction of videos in labeled transfers"),
    k("synth.treatment_sizes", "choice", "relative weights of 1-, 2- and 3-embryo transfers"),
    k("synth.viability.w_speed", "choice", "viability weight of developmental speed"),
    k("synth.viability.w_frag", "choice", "viability weight of fragmentation"),
    k("synth.viability.w_blast", "choice", "viability bonus for reaching blastocyst"),
    k("synth.viability.steepness", "choice", "steepness of the success probability (inf = step)"),
    k("synth.viability.offset", "choice", "score at which success probability is one half"),
    k("synth.seed", "choice", "seed of the synthetic corpus"),
];

impl Default for RunConfig {
    /// Method-scale defaults.
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data_dir: "corpus".into(),
            preprocess: PreprocessConfig::default(),
            sampling: Sampling::Uniform,
            view_pool: 0,
            augment: AugmentPolicy::default(),
            spatial_arch: SpatialArch::method_scale(),
            temporal_arch: TemporalArch::method_scale(),
            head_hidden: 64,
            loss: LossConfig::default(),
            spatial: StageConfig::spatial(),
            temporal: StageConfig::temporal(),
            finetune: StageConfig::finetune(),
            eval: EvalConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Overrides that turn the defaults into the laptop-scale preset.
pub const DESK_PRESET: &[(&str, &str)] = &[
    ("preprocess.resize_to", "64"),
    ("sampling.view_pool", "4"),
    ("model.spatial", "conv(input=64,channels=16-32-64-64,width=64)"),
    ("model.temporal", "transformer(width=64,layers=4,heads=8,mlp=128,max_len=128,pooling=mean)"),
    ("model.head_hidden", "32"),
    ("stage.spatial.epochs", "4"),
    ("stage.spatial.learning_rate", "0.001"),
    ("stage.temporal.epochs", "30"),
    ("stage.temporal.batch_size", "32"),
    ("stage.temporal.learning_rate", "0.0003"),
    ("stage.finetune.epochs", "10"),
    ("stage.finetune.learning_rate", "0.0003"),
];

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad_value(key, v, "true or false")),
    }
}

fn parse_num<T: core::str::FromStr>(key: &str, v: &str, what: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad_value(key, v, what))
}

fn bad_value(key: &str, v: &str, want: &str) -> Error {
    Error::InvalidConfig(format!("{key}: `{v}` is not {want}"))
}

impl RunConfig {
    pub fn desk() -> Self {
        let mut c = RunConfig::default();
        for (key, v) in DESK_PRESET {
            c.set(key, v).expect("desk preset keys are valid");
        }
        c
    }

    pub fn info(key: &str) -> Option<&'static KeyInfo> {
        KEYS.iter().find(|i| i.key == key)
    }

    /// Set one dotted key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let f = |v: &str| parse_num::<f64>(key, v, "a number");
        let n = |v: &str| parse_num::<usize>(key, v, "a non-negative integer");
        let b = |v: &str| parse_bool(key, v);
        let f32v = |v: &str| parse_num::<f32>(key, v, "a number");
        match key {
            "seed" => self.seed = parse_num(key, v, "an unsigned integer")?,
            "data.dir" => self.data_dir = v.to_string(),
            "preprocess.resize_to" => self.preprocess.resize_to = n(v)?,
            "preprocess.clip_max_frames" => self.preprocess.clip_max_frames = n(v)?,
            "preprocess.subsample_stride" => self.preprocess.subsample_stride = n(v)?,
            "preprocess.gradient_low_fraction" => self.preprocess.gradient_low_fraction = f(v)?,
            "preprocess.gradient_high_multiplier" => self.preprocess.gradient_high_multiplier = f(v)?,
            "sampling.mode" => {
                self.sampling = match v {
                    "uniform" => Sampling::Uniform,
                    "random" => Sampling::Random,
                    _ => return Err(bad_value(key, v, "uniform or random")),
                }
            }
            "sampling.view_pool" => self.view_pool = n(v)?,
            "augment.flip" => self.augment.enable_flip = b(v)?,
            "augment.rotation" => self.augment.enable_rotation = b(v)?,
            "augment.rotation_jitter_deg" => self.augment.rotation_jitter_deg = f32v(v)?,
            "augment.brightness" => self.augment.enable_brightness = b(v)?,
            "augment.brightness_max" => self.augment.brightness_max = f32v(v)?,
            "augment.contrast" => self.augment.enable_contrast = b(v)?,
            "augment.contrast_min" => self.augment.contrast_range.0 = f32v(v)?,
            "augment.contrast_max" => self.augment.contrast_range.1 = f32v(v)?,
            "augment.noise" => self.augment.enable_noise = b(v)?,
            "augment.noise_sigma" => self.augment.noise_sigma = f32v(v)?,
            "augment.temporally_consistent" => self.augment.temporally_consistent = b(v)?,
            "model.spatial" => self.spatial_arch = SpatialArch::parse(v).map_err(|_| bad_value(key, v, "a spatial descriptor"))?,
            "model.temporal" => self.temporal_arch = TemporalArch::parse(v).map_err(|_| bad_value(key, v, "a temporal descriptor"))?,
            "model.head_hidden" => self.head_hidden = n(v)?,
            "loss.lambda_var" => self.loss.lambda_var = f(v)?,
            "loss.sigma2_floor" => self.loss.sigma2_floor = f(v)?,
            "loss.tau" => self.loss.tau = f(v)?,
            "loss.huber_delta" => self.loss.huber_delta = f(v)?,
            "loss.normalize_by_length" => self.loss.normalize_by_length = b(v)?,
            "loss.ntxent_mode" => {
                self.loss.ntxent_mode = match v {
                    "literal" => NtXentMode::Literal,
                    "symmetric" => NtXentMode::Symmetric,
                    _ => return Err(bad_value(key, v, "literal or symmetric")),
                }
            }
            "eval.folds" => self.eval.folds = n(v)?,
            "eval.repeats" => self.eval.repeats = n(v)?,
            "eval.ablation" => self.eval.ablation = Ablation::parse(v)?,
            "eval.exclude_test_pixels_from_ssl" => self.eval.exclude_test_pixels_from_ssl = b(v)?,
            "eval.cache_embeddings" => self.eval.cache_embeddings = b(v)?,
            "synth.n_videos" => self.synth.n_videos = n(v)?,
            "synth.frame_size" => self.synth.frame_size = n(v)?,
            "synth.length_min" => self.synth.length_range.0 = n(v)?,
            "synth.length_max" => self.synth.length_range.1 = n(v)?,
            "synth.outlier_rate" => self.synth.outlier_rate = f(v)?,
            "synth.outlier_kinds" => {
                self.synth.outlier_kinds = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| OutlierKind::parse(s).map_err(|_| bad_value(key, s, "an outlier kind")))
                    .collect::<Result<_>>()?
            }
            "synth.label_fraction" => self.synth.label_fraction = f(v)?,
            "synth.treatment_sizes" => {
                let w: Vec<f64> = v.split(',').map(|s| f(s)).collect::<Result<_>>()?;
                self.synth.treatment_sizes = w.try_into().map_err(|_| bad_value(key, v, "three comma-separated weights"))?;
            }
            "synth.viability.w_speed" => self.synth.viability.w_speed = f(v)?,
            "synth.viability.w_frag" => self.synth.viability.w_frag = f(v)?,
            "synth.viability.w_blast" => self.synth.viability.w_blast = f(v)?,
            "synth.viability.steepness" => self.synth.viability.steepness = f(v)?,
            "synth.viability.offset" => self.synth.viability.offset = f(v)?,
            "synth.seed" => self.synth.seed = parse_num(key, v, "an unsigned integer")?,
            _ => return self.set_stage(key, v),
        }
        Ok(())
    }

    fn set_stage(&mut self, key: &str, v: &str) -> Result<()> {
        let unknown = || Error::UnknownConfigKey(key.to_string());
        let rest = key.strip_prefix("stage.").ok_or_else(unknown)?;
        let (stage, field) = rest.split_once('.').ok_or_else(unknown)?;
        let s = match stage {
            "spatial" => &mut self.spatial,
            "temporal" => &mut self.temporal,
            "finetune" => &mut self.finetune,
            _ => return Err(unknown()),
        };
        if RunConfig::info(key).is_none() {
            return Err(unknown());
        }
        match field {
            "epochs" => s.epochs = parse_num(key, v, "a non-negative integer")?,
            "batch_size" => s.batch_size = parse_num(key, v, "a non-negative integer")?,
            "n_views" => s.n_views = parse_num(key, v, "a non-negative integer")?,
            "learning_rate" => s.learning_rate = parse_num(key, v, "a number")?,
            "weight_decay" => s.weight_decay = parse_num(key, v, "a number")?,
            "decoupled_weight_decay" => s.decoupled_weight_decay = parse_bool(key, v)?,
            "augment" => s.augment = parse_bool(key, v)?,
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Current value of a dotted key, formatted so that `set` reads it back.
    pub fn get(&self, key: &str) -> Result<String> {
        let s = match key {
            "seed" => self.seed.to_string(),
            "data.dir" => self.data_dir.clone(),
            "preprocess.resize_to" => self.preprocess.resize_to.to_string(),
            "preprocess.clip_max_frames" => self.preprocess.clip_max_frames.to_string(),
            "preprocess.subsample_stride" => self.preprocess.subsample_stride.to_string(),
            "preprocess.gradient_low_fraction" => self.preprocess.gradient_low_fraction.to_string(),
            "preprocess.gradient_high_multiplier" => self.preprocess.gradient_high_multiplier.to_string(),
            "sampling.mode" => self.sampling.name().to_string(),
            "sampling.view_pool" => self.view_pool.to_string(),
            "augment.flip" => self.augment.enable_flip.to_string(),
            "augment.rotation" => self.augment.enable_rotation.to_string(),
            "augment.rotation_jitter_deg" => self.augment.rotation_jitter_deg.to_string(),
            "augment.brightness" => self.augment.enable_brightness.to_string(),
            "augment.brightness_max" => self.augment.brightness_max.to_string(),
            "augment.contrast" => self.augment.enable_contrast.to_string(),
            "augment.contrast_min" => self.augment.contrast_range.0.to_string(),
            "augment.contrast_max" => self.augment.contrast_range.1.to_string(),
            "augment.noise" => self.augment.enable_noise.to_string(),
            "augment.noise_sigma" => self.augment.noise_sigma.to_string(),
            "augment.temporally_consistent" => self.augment.temporally_consistent.to_string(),
            "model.spatial" => self.spatial_arch.descriptor(),
            "model.temporal" => self.temporal_arch.descriptor(),
            "model.head_hidden" => self.head_hidden.to_string(),
            "loss.lambda_var" => self.loss.lambda_var.to_string(),
            "loss.sigma2_floor" => self.loss.sigma2_floor.to_string(),
            "loss.tau" => self.loss.tau.to_string(),
            "loss.huber_delta" => self.loss.huber_delta.to_string(),
            "loss.normalize_by_length" => self.loss.normalize_by_length.to_string(),
            "loss.ntxent_mode" => match self.loss.ntxent_mode {
                NtXentMode::Literal => "literal".into(),
                NtXentMode::Symmetric => "symmetric".into(),
            },
            "eval.folds" => self.eval.folds.to_string(),
            "eval.repeats" => self.eval.repeats.to_string(),
            "eval.ablation" => self.eval.ablation.name().to_string(),
            "eval.exclude_test_pixels_from_ssl" => self.eval.exclude_test_pixels_from_ssl.to_string(),
            "eval.cache_embeddings" => self.eval.cache_embeddings.to_string(),
            "synth.n_videos" => self.synth.n_videos.to_string(),
            "synth.frame_size" => self.synth.frame_size.to_string(),
            "synth.length_min" => self.synth.length_range.0.to_string(),
            "synth.length_max" => self.synth.length_range.1.to_string(),
            "synth.outlier_rate" => self.synth.outlier_rate.to_string(),
            "synth.outlier_kinds" => self.synth.outlier_kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
            "synth.label_fraction" => self.synth.label_fraction.to_string(),
            "synth.treatment_sizes" => self.synth.treatment_sizes.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
            "synth.viability.w_speed" => self.synth.viability.w_speed.to_string(),
            "synth.viability.w_frag" => self.synth.viability.w_frag.to_string(),
            "synth.viability.w_blast" => self.synth.viability.w_blast.to_string(),
            "synth.viability.steepness" => self.synth.viability.steepness.to_string(),
            "synth.viability.offset" => self.synth.viability.offset.to_string(),
            "synth.seed" => self.synth.seed.to_string(),
            _ => {
                let unknown = || Error::UnknownConfigKey(key.to_string());
                RunConfig::info(key).ok_or_else(unknown)?;
                let (stage, field) = key.strip_prefix("stage.").and_then(|r| r.split_once('.')).ok_or_else(unknown)?;
                let s = match stage {
                    "spatial" => &self.spatial,
                    "temporal" => &self.temporal,
                    _ => &self.finetune,
                };
                match field {
                    "epochs" => s.epochs.to_string(),
                    "batch_size" => s.batch_size.to_string(),
                    "n_views" => s.n_views.to_string(),
                    "learning_rate" => s.learning_rate.to_string(),
                    "weight_decay" => s.weight_decay.to_string(),
                    "decoupled_weight_decay" => s.decoupled_weight_decay.to_string(),
                    "augment" => s.augment.to_string(),
                    _ => return Err(unknown()),
                }
            }
        };
        Ok(s)
    }

    /// Apply `key=value` overrides in order.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (key, v) in pairs {
            self.set(key, v)?;
        }
        self.validate()
    }

    /// Every key with its resolved value, sorted by key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out: Vec<(&'static str, String)> = KEYS.iter().map(|i| (i.key, self.get(i.key).expect("listed keys resolve"))).collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }

    /// `key = value` lines, sorted.
    pub fn resolved_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of the sorted `key=value` lines.
    pub fn fingerprint(&self) -> String {
        let text: String = self.entries().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        hex(&sha256(text.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.augment.validate()?;
        self.spatial_arch.validate()?;
        self.temporal_arch.validate()?;
        self.loss.validate()?;
        self.spatial.validate()?;
        self.temporal.validate()?;
        self.finetune.validate()?;
        self.synth.validate()?;
        if self.spatial_arch.input() != self.preprocess.resize_to {
            return Err(Error::InvalidConfig(format!(
                "model.spatial expects {}px frames but preprocess.resize_to is {}",
                self.spatial_arch.input(),
                self.preprocess.resize_to
            )));
        }
        if self.spatial_arch.width() != self.temporal_arch.width {
            return Err(Error::InvalidConfig(format!(
                "spatial width {} differs from temporal width {}",
                self.spatial_arch.width(),
                self.temporal_arch.width
            )));
        }
        if self.head_hidden == 0 {
            return Err(Error::InvalidConfig("model.head_hidden must be positive".into()));
        }
        if self.eval.folds < 2 || self.eval.repeats == 0 {
            return Err(Error::InvalidConfig("eval.folds must be >= 2 and eval.repeats >= 1".into()));
        }
        Ok(())
    }

    pub fn views(&self) -> ViewConfig {
        ViewConfig {
            augment: self.augment,
            sampling: self.sampling,
            stride: self.preprocess.subsample_stride,
            view_pool: self.view_pool,
            view_seed: crate::rng::derive(self.seed, &[crate::rng::tag("views")]),
        }
    }
}
