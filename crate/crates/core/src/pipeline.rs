//! Training stages, the freeze contract, checkpoints and parameter
//! accounting.
//!
//! - [`pretrain_spatial`]: multi-view cycle-consistency on frame embeddings;
//!   only the spatial encoder moves.
//! - [`pretrain_temporal`]: NT-Xent on video embeddings computed over a
//!   *borrowed* spatial encoder, so it cannot change.
//! - [`finetune`]: Huber regression of the viability target through the
//!   temporal encoder and the head, again over a borrowed spatial encoder.
//!
//! Training is single-stream and every random choice comes from a seed
//! derived from the stage seed, so identical inputs give identical
//! parameters.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use sha2::{Digest, Sha256};

use crate::augment::{apply_view, AugmentPolicy};
use crate::data::VideoSample;
use crate::encoders::{ClassifierHead, EmbeddingSequence, SpatialArch, SpatialEncoder, TemporalArch, TemporalEncoder, Trainable, VideoEmbedding};
use crate::error::{Error, Result};
use crate::losses::{huber_grad, huber_loss, multiview_tcc_loss_grad, ntxent_loss_grad, LossConfig};
use crate::nn::{Adam, AdamConfig, Module, Param};
use crate::preprocess::{random_indices, select_frames, uniform_indices};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageKind {
    Spatial,
    Temporal,
    Finetune,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Spatial => "spatial",
            StageKind::Temporal => "temporal",
            StageKind::Finetune => "finetune",
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(StageKind::Spatial),
            1 => Ok(StageKind::Temporal),
            2 => Ok(StageKind::Finetune),
            _ => Err(Error::Version(format!("unknown stage tag {t}"))),
        }
    }
}

/// How frames are picked from a preprocessed video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Every `stride`-th frame starting at 0.
    Uniform,
    /// `ceil(T / stride)` sorted random frames, redrawn per view.
    Random,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::Uniform => "uniform",
            Sampling::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub stage: StageKind,
    pub epochs: usize,
    /// Videos per optimizer step.
    pub batch_size: usize,
    pub n_views: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decoupled_weight_decay: bool,
    pub seed: u64,
    /// Augment the single fine-tuning view (pre-training always augments).
    pub augment: bool,
}

impl StageConfig {
    pub fn spatial() -> Self {
        StageConfig {
            stage: StageKind::Spatial,
            epochs: 50,
            batch_size: 4,
            n_views: 4,
            learning_rate: 1e-5,
            weight_decay: 1e-4,
            decoupled_weight_decay: false,
            seed: 0,
            augment: true,
        }
    }

    pub fn temporal() -> Self {
        StageConfig { stage: StageKind::Temporal, batch_size: 128, n_views: 2, weight_decay: 1e-5, ..Self::spatial() }
    }

    pub fn finetune() -> Self {
        StageConfig {
            stage: StageKind::Finetune,
            epochs: 10,
            batch_size: 2,
            n_views: 1,
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            ..Self::spatial()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.stage.name();
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig(format!("stage.{name}.batch_size must be positive")));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!("stage.{name}: learning rate must be > 0 and weight decay >= 0")));
        }
        if self.stage != StageKind::Finetune && self.n_views < 2 {
            return Err(Error::InvalidConfig(format!("stage.{name}.n_views must be >= 2, got {}", self.n_views)));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { decoupled: self.decoupled_weight_decay, ..AdamConfig::new(self.learning_rate as f32, self.weight_decay as f32) }
    }
}

/// Everything about *how* videos become training views, shared by stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewConfig {
    pub augment: AugmentPolicy,
    pub sampling: Sampling,
    /// Temporal stride applied when views are drawn. Use 1 when videos were
    /// already subsampled during preprocessing.
    pub stride: usize,
    /// When nonzero, each video's views come from this many fixed view
    /// slots instead of fresh draws, so frozen-encoder embeddings can be
    /// cached across epochs and stages.
    pub view_pool: usize,
    /// Seed of the view slots (shared across stages so caches carry over).
    pub view_seed: u64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { augment: AugmentPolicy::default(), sampling: Sampling::Uniform, stride: 1, view_pool: 0, view_seed: 0 }
    }
}

impl ViewConfig {
    fn frame_indices(&self, len: usize, seed: u64) -> Vec<usize> {
        match self.sampling {
            Sampling::Uniform => uniform_indices(len, self.stride),
            Sampling::Random => random_indices(len, len.div_ceil(self.stride.max(1)), rng::derive(seed, &[rng::tag("select")])),
        }
    }

    /// Frames of the view identified by `seed`, augmented or not.
    pub fn view(&self, video: &VideoSample, seed: u64, augment: bool) -> VideoSample {
        let v = select_frames(video, &self.frame_indices(video.len(), seed));
        if augment {
            apply_view(&v, &self.augment, rng::derive(seed, &[rng::tag("augment")]))
        } else {
            v
        }
    }

    /// Seed of view number `k` of `video` in `epoch` of a stage seeded by `stage_seed`.
    pub fn view_seed_for(&self, video: &VideoSample, stage_seed: u64, epoch: usize, k: usize, taken: &[u64]) -> u64 {
        let id = rng::tag(&video.video_id);
        if self.view_pool == 0 {
            return rng::derive(stage_seed, &[rng::tag("view"), id, epoch as u64, k as u64]);
        }
        // pick a pooled slot not yet used for this video in this step
        let mut r = rng::rng(rng::derive(stage_seed, &[rng::tag("slot"), id, epoch as u64, k as u64]));
        let slot_seed = |s: usize| rng::derive(self.view_seed, &[rng::tag("pool"), id, s as u64]);
        let free: Vec<u64> = (0..self.view_pool).map(slot_seed).filter(|s| !taken.contains(s)).collect();
        if free.is_empty() {
            slot_seed(r.random_range(0..self.view_pool))
        } else {
            free[r.random_range(0..free.len())]
        }
    }

    /// The fixed, unaugmented view used at prediction time.
    pub fn eval_seed(&self, video: &VideoSample) -> u64 {
        rng::derive(self.view_seed, &[rng::tag("eval"), rng::tag(&video.video_id)])
    }
}

/// Frame embeddings from a frozen spatial encoder, keyed by
/// (video id, view seed, augmented). Bound to one encoder's parameters.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingCache {
    enabled: bool,
    encoder: Option<[u8; 32]>,
    map: BTreeMap<(String, u64, bool), EmbeddingSequence>,
    pub hits: usize,
    pub misses: usize,
}

impl EmbeddingCache {
    pub fn disabled() -> Self {
        EmbeddingCache::default()
    }

    pub fn for_encoder(fs: &SpatialEncoder) -> Self {
        EmbeddingCache { enabled: true, encoder: Some(param_hash(fs)), ..Default::default() }
    }

    pub fn is_bound_to(&self, fs: &SpatialEncoder) -> bool {
        self.encoder == Some(param_hash(fs))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn embed(&mut self, fs: &SpatialEncoder, views: &ViewConfig, video: &VideoSample, seed: u64, augment: bool) -> Result<EmbeddingSequence> {
        let key = (video.video_id.clone(), seed, augment);
        if self.enabled {
            if let Some(e) = self.map.get(&key) {
                self.hits += 1;
                return Ok(e.clone());
            }
        }
        self.misses += 1;
        let e = fs.encode_frames(&views.view(video, seed, augment))?;
        if self.enabled {
            self.map.insert(key, e.clone());
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutcome {
    pub log: Vec<EpochLog>,
    /// Videos skipped for being too short.
    pub skipped: usize,
    /// Seed that a continuation of this stage would start from.
    pub rng_state: u64,
}

impl StageOutcome {
    /// `epoch<TAB>loss<TAB>wallclock_s` lines.
    pub fn log_text(&self) -> String {
        self.log.iter().map(|l| format!("{}\t{:.6}\t{:.3}\n", l.epoch, l.loss, l.wallclock_s)).collect()
    }
}

/// Wall-clock source in seconds; `None` records zeros.
pub type Clock = Option<fn() -> f64>;

fn now(clock: Clock) -> f64 {
    clock.map_or(0.0, |c| c())
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    order
}

fn non_finite(stage: StageKind, epoch: usize, what: &str) -> Error {
    Error::NonFinite(format!("{what} in {} stage, epoch {}", stage.name(), epoch + 1))
}

/// Spatial pre-training: per video, `n_views` temporally consistent views,
/// multi-view cycle-consistency loss, gradients summed over `batch_size`
/// videos and averaged before each Adam step. Videos shorter than 2 frames
/// after sampling are skipped and counted.
pub fn pretrain_spatial(
    videos: &[&VideoSample],
    fs: &mut SpatialEncoder,
    cfg: &StageConfig,
    views: &ViewConfig,
    loss: &LossConfig,
    clock: Clock,
) -> Result<StageOutcome> {
    cfg.validate()?;
    loss.validate()?;
    let mut opt = fs.is_trainable().then(|| Adam::new(cfg.adam(), &fs.params()));
    let mut out = StageOutcome::default();
    let t0 = now(clock);
    for epoch in 0..cfg.epochs {
        let order = shuffled(videos.len(), rng::derive(cfg.seed, &[rng::tag("order"), epoch as u64]));
        let (mut total, mut counted) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            fs.zero_grad();
            let mut in_batch = 0usize;
            for &i in batch {
                let video = videos[i];
                let mut taken = Vec::with_capacity(cfg.n_views);
                let mut seqs = Vec::with_capacity(cfg.n_views);
                let mut caches = Vec::with_capacity(cfg.n_views);
                // all views of one video share the frame selection
                let select = views.view_seed_for(video, cfg.seed, epoch, usize::MAX, &[]);
                let base = select_frames(video, &views.frame_indices(video.len(), select));
                if base.len() < 2 {
                    if epoch == 0 {
                        out.skipped += 1;
                    }
                    continue;
                }
                for k in 0..cfg.n_views {
                    let s = views.view_seed_for(video, cfg.seed, epoch, k, &taken);
                    taken.push(s);
                    let v = apply_view(&base, &views.augment, rng::derive(s, &[rng::tag("augment")]));
                    let (e, c) = fs.forward_train(&v)?;
                    seqs.push(e);
                    caches.push(c);
                }
                let g = multiview_tcc_loss_grad(&seqs, loss)?;
                if !g.value.is_finite() {
                    return Err(non_finite(cfg.stage, epoch, "multiview alignment loss"));
                }
                if opt.is_some() {
                    for (c, grad) in caches.iter().zip(&g.grads) {
                        fs.backward(c, grad);
                    }
                }
                total += g.value;
                counted += 1;
                in_batch += 1;
            }
            if let (Some(o), true) = (opt.as_mut(), in_batch > 0) {
                fs.scale_grad(1.0 / in_batch as f32);
                o.step(fs.params_mut());
            }
        }
        let mean = if counted > 0 { total / counted as f64 } else { 0.0 };
        if counted > 0 {
            out.log.push(EpochLog { epoch: epoch + 1, loss: mean, wallclock_s: now(clock) - t0 });
        }
    }
    fs.zero_grad();
    out.rng_state = rng::derive(cfg.seed, &[cfg.epochs as u64]);
    Ok(out)
}

/// Temporal pre-training over a borrowed (hence frozen) spatial encoder.
/// Each mini-batch contributes two views per video; sequences are padded to
/// the batch maximum and masked; NT-Xent gradients flow into `ft` only.
pub fn pretrain_temporal(
    videos: &[&VideoSample],
    fs: &SpatialEncoder,
    ft: &mut TemporalEncoder,
    cfg: &StageConfig,
    views: &ViewConfig,
    loss: &LossConfig,
    cache: &mut EmbeddingCache,
    clock: Clock,
) -> Result<StageOutcome> {
    cfg.validate()?;
    loss.validate()?;
    let mut opt = ft.is_trainable().then(|| Adam::new(cfg.adam(), &ft.params()));
    let mut out = StageOutcome::default();
    let t0 = now(clock);
    for epoch in 0..cfg.epochs {
        let order = shuffled(videos.len(), rng::derive(cfg.seed, &[rng::tag("order"), epoch as u64]));
        let (mut total, mut batches) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut a = Vec::with_capacity(batch.len());
            let mut b = Vec::with_capacity(batch.len());
            for &i in batch {
                let video = videos[i];
                let sa = views.view_seed_for(video, cfg.seed, epoch, 0, &[]);
                let sb = views.view_seed_for(video, cfg.seed, epoch, 1, &[sa]);
                a.push(cache.embed(fs, views, video, sa, true)?);
                b.push(cache.embed(fs, views, video, sb, true)?);
            }
            let longest = a.iter().chain(&b).map(EmbeddingSequence::len).max().unwrap_or(0);
            ft.zero_grad();
            let mut fa = Vec::with_capacity(a.len());
            let mut fb = Vec::with_capacity(b.len());
            let (mut za, mut zb) = (Vec::new(), Vec::new());
            for s in &a {
                let (z, f) = ft.forward_train(&s.padded(longest))?;
                za.push(z);
                fa.push(f);
            }
            for s in &b {
                let (z, f) = ft.forward_train(&s.padded(longest))?;
                zb.push(z);
                fb.push(f);
            }
            let g = ntxent_loss_grad(&za, &zb, loss.tau, loss.ntxent_mode)?;
            if !g.value.is_finite() {
                return Err(non_finite(cfg.stage, epoch, "contrastive loss"));
            }
            if let Some(o) = opt.as_mut() {
                for (f, d) in fa.iter().zip(&g.da).chain(fb.iter().zip(&g.db)) {
                    ft.backward(f, d);
                }
                o.step(ft.params_mut());
            }
            total += g.value;
            batches += 1;
        }
        if batches > 0 {
            out.log.push(EpochLog { epoch: epoch + 1, loss: total / batches as f64, wallclock_s: now(clock) - t0 });
        }
    }
    ft.zero_grad();
    out.rng_state = rng::derive(cfg.seed, &[cfg.epochs as u64]);
    Ok(out)
}

/// A labeled training example: a video and its regression target.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub video: &'a VideoSample,
    pub target: f64,
}

/// Supervised fine-tuning of the temporal encoder and head with the mean
/// Huber loss over each mini-batch. The spatial encoder is borrowed.
#[allow(clippy::too_many_arguments)]
pub fn finetune(
    data: &[Labeled<'_>],
    fs: &SpatialEncoder,
    ft: &mut TemporalEncoder,
    fc: &mut ClassifierHead,
    cfg: &StageConfig,
    views: &ViewConfig,
    loss: &LossConfig,
    cache: &mut EmbeddingCache,
    clock: Clock,
) -> Result<StageOutcome> {
    cfg.validate()?;
    loss.validate()?;
    if data.is_empty() {
        return Err(Error::NoLabels);
    }
    let mut opt = {
        let mut ps: Vec<&Param> = Vec::new();
        if ft.is_trainable() {
            ps.extend(ft.params());
        }
        if fc.is_trainable() {
            ps.extend(fc.params());
        }
        (!ps.is_empty()).then(|| Adam::new(cfg.adam(), &ps))
    };
    let mut out = StageOutcome::default();
    let t0 = now(clock);
    for epoch in 0..cfg.epochs {
        let order = shuffled(data.len(), rng::derive(cfg.seed, &[rng::tag("order"), epoch as u64]));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            ft.zero_grad();
            fc.zero_grad();
            let n = batch.len() as f64;
            for &i in batch {
                let ex = &data[i];
                let seed = if cfg.augment {
                    views.view_seed_for(ex.video, cfg.seed, epoch, 0, &[])
                } else {
                    views.eval_seed(ex.video)
                };
                let seq = cache.embed(fs, views, ex.video, seed, cfg.augment)?;
                let (z, tf) = ft.forward_train(&seq)?;
                let (p_hat, hf) = fc.forward_train(&z)?;
                let l = huber_loss(ex.target, p_hat, loss.huber_delta);
                if !l.is_finite() {
                    return Err(non_finite(cfg.stage, epoch, "Huber loss"));
                }
                total += l;
                if opt.is_some() {
                    let dz = fc.backward(&hf, huber_grad(ex.target, p_hat, loss.huber_delta) / n);
                    if ft.is_trainable() {
                        ft.backward(&tf, &dz);
                    }
                }
            }
            if let Some(o) = opt.as_mut() {
                let mut ps: Vec<&mut Param> = Vec::new();
                if ft.is_trainable() {
                    ps.extend(ft.params_mut());
                }
                if fc.is_trainable() {
                    ps.extend(fc.params_mut());
                }
                o.step(ps);
            }
        }
        out.log.push(EpochLog { epoch: epoch + 1, loss: total / data.len() as f64, wallclock_s: now(clock) - t0 });
    }
    ft.zero_grad();
    fc.zero_grad();
    out.rng_state = rng::derive(cfg.seed, &[cfg.epochs as u64]);
    Ok(out)
}

/// Embed one video with the evaluation view (no augmentation).
pub fn embed_video(fs: &SpatialEncoder, ft: &TemporalEncoder, views: &ViewConfig, cache: &mut EmbeddingCache, video: &VideoSample) -> Result<VideoEmbedding> {
    let seq = cache.embed(fs, views, video, views.eval_seed(video), false)?;
    ft.encode_video(&seq)
}

pub fn predict(
    fs: &SpatialEncoder,
    ft: &TemporalEncoder,
    fc: &ClassifierHead,
    views: &ViewConfig,
    cache: &mut EmbeddingCache,
    video: &VideoSample,
) -> Result<f64> {
    fc.predict_viability(&embed_video(fs, ft, views, cache, video)?)
}

// ---------------------------------------------------------------------------
// Parameter accounting

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleAccount {
    pub module: &'static str,
    pub params: usize,
    pub trainable: bool,
    pub optimizer_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainableReport {
    pub stage: StageKind,
    pub modules: Vec<ModuleAccount>,
    pub trainable: usize,
    pub frozen: usize,
    pub optimizer_state: usize,
    /// Parameters an end-to-end run would train (all three modules).
    pub end_to_end: usize,
    /// `end_to_end / trainable`.
    pub ratio: f64,
}

/// Which modules a stage trains. Shared with the stage functions, which
/// allocate optimizer state for exactly these.
pub fn stage_trains(stage: StageKind) -> [bool; 3] {
    match stage {
        StageKind::Spatial => [true, false, false],
        StageKind::Temporal => [false, true, false],
        StageKind::Finetune => [false, true, true],
    }
}

pub fn trainable_report(stage: &StageConfig, fs: &SpatialEncoder, ft: &TemporalEncoder, fc: &ClassifierHead) -> TrainableReport {
    let trains = stage_trains(stage.stage);
    let mods: [(&'static str, Vec<&Param>); 3] = [("spatial", fs.params()), ("temporal", ft.params()), ("head", fc.params())];
    let modules: Vec<ModuleAccount> = mods
        .iter()
        .zip(trains)
        .map(|((name, ps), on)| ModuleAccount {
            module: name,
            params: ps.iter().map(|p| p.len()).sum(),
            trainable: on,
            optimizer_state: if on { Adam::new(stage.adam(), ps).state_len() } else { 0 },
        })
        .collect();
    let trainable: usize = modules.iter().filter(|m| m.trainable).map(|m| m.params).sum();
    let end_to_end: usize = modules.iter().map(|m| m.params).sum();
    TrainableReport {
        stage: stage.stage,
        trainable,
        frozen: end_to_end - trainable,
        optimizer_state: modules.iter().map(|m| m.optimizer_state).sum(),
        end_to_end,
        ratio: if trainable > 0 { end_to_end as f64 / trainable as f64 } else { f64::INFINITY },
        modules,
    }
}

impl core::fmt::Display for TrainableReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "stage\t{}", self.stage.name())?;
        writeln!(f, "module\tparams\ttrainable\toptimizer_state")?;
        for m in &self.modules {
            writeln!(f, "{}\t{}\t{}\t{}", m.module, m.params, m.trainable, m.optimizer_state)?;
        }
        writeln!(f, "trainable\t{}", self.trainable)?;
        writeln!(f, "frozen\t{}", self.frozen)?;
        writeln!(f, "optimizer_state\t{}", self.optimizer_state)?;
        writeln!(f, "end_to_end\t{}", self.end_to_end)?;
        writeln!(f, "end_to_end_over_stage\t{:.3}", self.ratio)
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout, all integers little-endian:
//
//   "STPT1" | stage u8 | epoch u32 | fingerprint (u16 len + utf8)
//   | sha256(payload) [32] | payload length u64 | payload
//
// payload: rng_state u64 | section count u8 | sections
// section: name str | descriptor str | param count u32 | params
// param:   name str | rank u8 | dims u32 * rank | values f32 * prod(dims)
//
// where `str` is a u16 length followed by UTF-8 bytes.

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"STPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Serialized parameters of one module plus its architecture descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleState {
    pub descriptor: String,
    pub params: Vec<Tensor>,
}

impl ModuleState {
    pub fn capture(descriptor: String, m: &impl Module) -> Self {
        let params = m.params().iter().map(|p| Tensor { name: p.name.clone(), shape: p.shape.clone(), values: p.value.clone() }).collect();
        ModuleState { descriptor, params }
    }

    /// Copy values into `m`, which must have identical names and shapes.
    pub fn restore_into(&self, m: &mut impl Module) -> Result<()> {
        let mut ps = m.params_mut();
        if ps.len() != self.params.len() {
            return Err(Error::Version(format!("{}: {} tensors stored, module has {}", self.descriptor, self.params.len(), ps.len())));
        }
        for (p, t) in ps.iter_mut().zip(&self.params) {
            if p.name != t.name || p.shape != t.shape {
                return Err(Error::Version(format!("tensor `{}` {:?} does not match `{}` {:?}", t.name, t.shape, p.name, p.shape)));
            }
            p.value.copy_from_slice(&t.values);
        }
        Ok(())
    }

    /// Little-endian bytes of every parameter value, in visiting order.
    pub fn payload_bytes(&self) -> Vec<u8> {
        self.params.iter().flat_map(|t| t.values.iter().flat_map(|v| v.to_le_bytes())).collect()
    }
}

pub fn head_descriptor(fc: &ClassifierHead) -> String {
    format!("head(width={},hidden={})", fc.width(), fc.hidden())
}

pub fn parse_head_descriptor(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Version(format!("bad head descriptor `{s}`"));
    let inner = s.strip_prefix("head(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
    let mut width = None;
    let mut hidden = None;
    for kv in inner.split(',') {
        match kv.split_once('=') {
            Some(("width", v)) => width = v.parse().ok(),
            Some(("hidden", v)) => hidden = v.parse().ok(),
            _ => return Err(bad()),
        }
    }
    Ok((width.ok_or_else(bad)?, hidden.ok_or_else(bad)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageCheckpoint {
    pub stage: StageKind,
    pub epoch: u32,
    pub fingerprint: String,
    pub spatial: Option<ModuleState>,
    pub temporal: Option<ModuleState>,
    pub head: Option<ModuleState>,
    pub rng_state: u64,
}

impl StageCheckpoint {
    pub fn new(stage: StageKind, epoch: usize, fingerprint: &str, rng_state: u64) -> Self {
        StageCheckpoint { stage, epoch: epoch as u32, fingerprint: fingerprint.to_string(), spatial: None, temporal: None, head: None, rng_state }
    }

    pub fn with_spatial(mut self, fs: &SpatialEncoder) -> Self {
        self.spatial = Some(ModuleState::capture(fs.arch().descriptor(), fs));
        self
    }

    pub fn with_temporal(mut self, ft: &TemporalEncoder) -> Self {
        self.temporal = Some(ModuleState::capture(ft.arch().descriptor(), ft));
        self
    }

    pub fn with_head(mut self, fc: &ClassifierHead) -> Self {
        self.head = Some(ModuleState::capture(head_descriptor(fc), fc));
        self
    }

    pub fn spatial_encoder(&self, expect: Option<&SpatialArch>) -> Result<SpatialEncoder> {
        let st = self.spatial.as_ref().ok_or(Error::MissingSpatialCheckpoint)?;
        let arch = SpatialArch::parse(&st.descriptor)?;
        if let Some(e) = expect {
            if *e != arch {
                return Err(Error::Version(format!("checkpoint holds `{}`, config expects `{}`", st.descriptor, e.descriptor())));
            }
        }
        let mut fs = SpatialEncoder::new(&arch, 0)?;
        st.restore_into(&mut fs)?;
        Ok(fs)
    }

    pub fn temporal_encoder(&self, expect: Option<&TemporalArch>) -> Result<TemporalEncoder> {
        let st = self.temporal.as_ref().ok_or_else(|| Error::Corruption("checkpoint has no temporal encoder".into()))?;
        let arch = TemporalArch::parse(&st.descriptor)?;
        if let Some(e) = expect {
            if *e != arch {
                return Err(Error::Version(format!("checkpoint holds `{}`, config expects `{}`", st.descriptor, e.descriptor())));
            }
        }
        let mut ft = TemporalEncoder::new(&arch, 0)?;
        st.restore_into(&mut ft)?;
        Ok(ft)
    }

    pub fn head(&self) -> Result<ClassifierHead> {
        let st = self.head.as_ref().ok_or_else(|| Error::Corruption("checkpoint has no classifier head".into()))?;
        let (w, h) = parse_head_descriptor(&st.descriptor)?;
        let mut fc = ClassifierHead::zeros(w, h);
        st.restore_into(&mut fc)?;
        Ok(fc)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        payload.extend(self.rng_state.to_le_bytes());
        let sections: Vec<(&str, &ModuleState)> = [("spatial", &self.spatial), ("temporal", &self.temporal), ("head", &self.head)]
            .into_iter()
            .filter_map(|(n, s)| s.as_ref().map(|s| (n, s)))
            .collect();
        payload.push(sections.len() as u8);
        for (name, st) in sections {
            put_str(&mut payload, name);
            put_str(&mut payload, &st.descriptor);
            payload.extend((st.params.len() as u32).to_le_bytes());
            for t in &st.params {
                put_str(&mut payload, &t.name);
                payload.push(t.shape.len() as u8);
                for &d in &t.shape {
                    payload.extend((d as u32).to_le_bytes());
                }
                for v in &t.values {
                    payload.extend(v.to_le_bytes());
                }
            }
        }
        let mut out = Vec::with_capacity(payload.len() + 64);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(self.stage.tag());
        out.extend(self.epoch.to_le_bytes());
        put_str(&mut out, &self.fingerprint);
        out.extend(sha256(&payload));
        out.extend((payload.len() as u64).to_le_bytes());
        out.extend(payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(5)? != CHECKPOINT_MAGIC {
            return Err(Error::Version("not an STPT1 checkpoint".into()));
        }
        let stage = StageKind::from_tag(r.u8()?)?;
        let epoch = r.u32()?;
        let fingerprint = r.str()?;
        let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let len = r.u64()? as usize;
        let payload = r.take(len)?;
        if r.pos != bytes.len() {
            return Err(Error::Corruption(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if sha256(payload) != hash {
            return Err(Error::Corruption("payload hash mismatch".into()));
        }
        let mut p = Reader { buf: payload, pos: 0 };
        let mut ck = StageCheckpoint::new(stage, 0, &fingerprint, p.u64()?);
        ck.epoch = epoch;
        for _ in 0..p.u8()? {
            let name = p.str()?;
            let descriptor = p.str()?;
            let n = p.u32()? as usize;
            let mut params = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let pname = p.str()?;
                let rank = p.u8()? as usize;
                let shape = (0..rank).map(|_| p.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
                let count: usize = shape.iter().product();
                let raw = p.take(count.checked_mul(4).ok_or_else(|| Error::Corruption("tensor too large".into()))?)?;
                let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
                params.push(Tensor { name: pname, shape, values });
            }
            let st = Some(ModuleState { descriptor, params });
            match name.as_str() {
                "spatial" => ck.spatial = st,
                "temporal" => ck.temporal = st,
                "head" => ck.head = st,
                other => return Err(Error::Version(format!("unknown checkpoint section `{other}`"))),
            }
        }
        if p.pos != payload.len() {
            return Err(Error::Corruption("payload has trailing bytes".into()));
        }
        Ok(ck)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u16).to_le_bytes());
    out.extend(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Corruption("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String> {
        let n = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Corruption("invalid UTF-8 string".into()))
    }
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Hash of a module's parameter values; equal hashes mean bit-identical
/// parameters.
pub fn param_hash(m: &impl Module) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in m.params() {
        h.update(p.name.as_bytes());
        for v in &p.value {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
