//! Procedural embryo-like time-lapse corpus.
//!
//! Each video is a dark noisy field with a circular well, a zona ring and a
//! cluster of bright cells that divide along a [`DevelopmentTimeline`]. A
//! latent viability score is a fixed function of three things a viewer can
//! see: how fast the embryo develops, how fragmented it looks, and whether
//! it reaches the blastocyst stage inside the recording. Labels are Bernoulli
//! draws from a logistic of that score, shared by the embryos of one
//! treatment.
//!
//! Generation is split in two: [`plan_corpus`] draws every per-video latent
//! (cheap, no pixels) and [`render_video`] turns one plan into frames. Each
//! video renders from its own derived seed, so videos can be produced in any
//! order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::{DatasetManifest, Frame, ManifestRecord, VideoSample, ViabilityLabel};
use crate::error::{Error, Result};
use crate::evaluate::auroc;
use crate::math;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    One,
    Two,
    Four,
    Eight,
    Morula,
    Blastocyst,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::One, Stage::Two, Stage::Four, Stage::Eight, Stage::Morula, Stage::Blastocyst];

    /// Number of cell blobs drawn for this stage.
    pub fn cells(self) -> usize {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
            Stage::Four => 4,
            Stage::Eight => 8,
            Stage::Morula => 16,
            Stage::Blastocyst => 32,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierKind {
    Blank,
    LowExposure,
    Blur,
    OffCenter,
    Debris,
}

impl OutlierKind {
    pub const ALL: [OutlierKind; 5] =
        [OutlierKind::Blank, OutlierKind::LowExposure, OutlierKind::Blur, OutlierKind::OffCenter, OutlierKind::Debris];

    pub fn name(self) -> &'static str {
        match self {
            OutlierKind::Blank => "blank",
            OutlierKind::LowExposure => "low_exposure",
            OutlierKind::Blur => "blur",
            OutlierKind::OffCenter => "off_center",
            OutlierKind::Debris => "debris",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown outlier kind `{s}`")))
    }
}

/// Maps visible development traits to a success probability.
///
/// `score = -w_speed * ln(speed_factor) - w_frag * fragmentation + w_blast * [blastocyst]`,
/// `P(success) = sigmoid(steepness * (score - offset))`. An infinite
/// steepness gives a deterministic threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViabilityModel {
    pub w_speed: f64,
    pub w_frag: f64,
    pub w_blast: f64,
    pub steepness: f64,
    pub offset: f64,
}

impl Default for ViabilityModel {
    fn default() -> Self {
        ViabilityModel { w_speed: 4.0, w_frag: 3.0, w_blast: 1.5, steepness: 4.0, offset: 1.0 }
    }
}

impl ViabilityModel {
    pub fn score(&self, speed_factor: f64, fragmentation: f64, blastocyst: bool) -> f64 {
        -self.w_speed * math::ln(speed_factor) - self.w_frag * fragmentation
            + if blastocyst { self.w_blast } else { 0.0 }
    }

    pub fn success_probability(&self, score: f64) -> f64 {
        let x = score - self.offset;
        if self.steepness.is_infinite() {
            return if x > 0.0 { 1.0 } else if x < 0.0 { 0.0 } else { 0.5 };
        }
        math::sigmoid(self.steepness * x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_videos: usize,
    pub frame_size: usize,
    /// Inclusive range of raw video lengths.
    pub length_range: (usize, usize),
    pub outlier_rate: f64,
    pub outlier_kinds: Vec<OutlierKind>,
    pub label_fraction: f64,
    pub viability: ViabilityModel,
    /// Relative weights of treatments transferring 1, 2 and 3 embryos.
    pub treatment_sizes: [f64; 3],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_videos: 300,
            frame_size: 64,
            length_range: (80, 120),
            outlier_rate: 0.02,
            outlier_kinds: OutlierKind::ALL.to_vec(),
            label_fraction: 0.5,
            viability: ViabilityModel::default(),
            treatment_sizes: [0.6, 0.3, 0.1],
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.length_range.0 < 8 || self.length_range.1 < self.length_range.0 {
            return bad(format!("length range {:?} must satisfy 8 <= min <= max", self.length_range));
        }
        if self.frame_size < 16 {
            return bad(format!("frame size {} is below 16", self.frame_size));
        }
        for (name, v) in [("outlier_rate", self.outlier_rate), ("label_fraction", self.label_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.outlier_rate > 0.0 && self.outlier_kinds.is_empty() {
            return bad("outlier_rate > 0 needs at least one outlier kind".into());
        }
        if self.treatment_sizes.iter().any(|w| !(*w >= 0.0)) || self.treatment_sizes.iter().sum::<f64>() <= 0.0 {
            return bad("treatment size weights must be nonnegative and not all zero".into());
        }
        let v = &self.viability;
        if [v.w_speed, v.w_frag, v.w_blast, v.offset].iter().any(|x| !x.is_finite()) || !(v.steepness >= 0.0) {
            return bad("viability model parameters must be finite with steepness >= 0".into());
        }
        Ok(())
    }
}

/// Nominal raw-frame index of each cleavage at `speed_factor = 1`.
const NOMINAL_BOUNDARIES: [f64; 5] = [10.0, 22.0, 34.0, 50.0, 66.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DevelopmentTimeline {
    /// Frame indices where the stage advances; `stage_boundaries[k]` starts
    /// `Stage::ALL[k + 1]`.
    pub stage_boundaries: Vec<usize>,
    pub end_stage: Stage,
    pub speed_factor: f64,
}

impl DevelopmentTimeline {
    pub fn stage_at(&self, t: usize) -> Stage {
        Stage::ALL[self.stage_boundaries.iter().filter(|&&b| b <= t).count()]
    }
}

/// Everything drawn for one video before any pixel is rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbryoPlan {
    pub video_id: String,
    pub treatment_id: String,
    pub length: usize,
    pub timeline: DevelopmentTimeline,
    pub fragmentation: f64,
    pub score: f64,
    pub transferred: bool,
    pub success: bool,
    pub label: Option<ViabilityLabel>,
    /// Sorted (frame index, kind) pairs.
    pub outliers: Vec<(usize, OutlierKind)>,
    pub render_seed: u64,
}

impl EmbryoPlan {
    pub fn outlier_indices(&self) -> Vec<usize> {
        self.outliers.iter().map(|o| o.0).collect()
    }

    pub fn manifest_record(&self) -> ManifestRecord {
        ManifestRecord {
            video_id: self.video_id.clone(),
            treatment_id: self.treatment_id.clone(),
            path: format!("videos/{}", self.video_id),
            frame_count: self.length,
            transferred: self.transferred,
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPlan {
    pub videos: Vec<EmbryoPlan>,
}

impl CorpusPlan {
    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest::new(self.videos.iter().map(EmbryoPlan::manifest_record).collect())
            .expect("generated ids are unique")
    }

    pub fn get(&self, video_id: &str) -> Option<&EmbryoPlan> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }
}

fn draw_timeline(length: usize, speed_factor: f64, arrest_at: Option<Stage>, r: &mut Rng) -> DevelopmentTimeline {
    let last = arrest_at.unwrap_or(Stage::Blastocyst).index();
    let mut boundaries = Vec::new();
    let mut prev = 0usize;
    for (k, &nominal) in NOMINAL_BOUNDARIES.iter().enumerate().take(last) {
        let jitter = 1.0 + 0.04 * rng::normal(r);
        let b = ((nominal * speed_factor * jitter) as usize).max(prev + 1).max(k + 1);
        if b >= length {
            break;
        }
        boundaries.push(b);
        prev = b;
    }
    DevelopmentTimeline { end_stage: Stage::ALL[boundaries.len()], stage_boundaries: boundaries, speed_factor }
}

fn pick_size(weights: &[f64; 3], r: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i + 1;
        }
        u -= w;
    }
    3
}

/// Draw every per-video latent, label and outlier index for `cfg`.
pub fn plan_corpus(cfg: &SynthConfig) -> Result<CorpusPlan> {
    cfg.validate()?;
    let mut r = rng::rng(rng::derive(cfg.seed, &[rng::tag("synth-plan")]));
    let n_labeled = libm::round(cfg.label_fraction * cfg.n_videos as f64) as usize;

    // Treatment groups: labeled videos come in groups of 1-3, the rest are singletons.
    let mut groups: Vec<(usize, bool)> = Vec::new();
    let mut placed = 0;
    while placed < n_labeled {
        let size = pick_size(&cfg.treatment_sizes, &mut r).min(n_labeled - placed);
        groups.push((size, true));
        placed += size;
    }
    groups.extend((n_labeled..cfg.n_videos).map(|_| (1, false)));

    let mut videos = Vec::with_capacity(cfg.n_videos);
    for (g, &(size, labeled)) in groups.iter().enumerate() {
        let treatment_id = format!("t{g:04}");
        let quality = rng::normal(&mut r);
        let mut members = Vec::with_capacity(size);
        for _ in 0..size {
            let e = quality + 0.3 * rng::normal(&mut r);
            let speed_factor = math::exp(-0.2 * e + 0.06 * rng::normal(&mut r));
            let fragmentation = (0.25 - 0.15 * e + 0.08 * rng::normal(&mut r)).clamp(0.0, 1.0);
            let arrests = r.random::<f64>() < math::sigmoid(-3.0 - 2.0 * e);
            let arrest_at = arrests.then(|| Stage::ALL[1 + r.random_range(0..4usize)]);
            let length = r.random_range(cfg.length_range.0..=cfg.length_range.1);
            let timeline = draw_timeline(length, speed_factor, arrest_at, &mut r);
            let score = cfg.viability.score(speed_factor, fragmentation, timeline.end_stage == Stage::Blastocyst);
            let success = r.random::<f64>() < cfg.viability.success_probability(score);
            let mut outliers = Vec::new();
            for t in 0..length {
                if cfg.outlier_rate > 0.0 && r.random::<f64>() < cfg.outlier_rate {
                    outliers.push((t, cfg.outlier_kinds[r.random_range(0..cfg.outlier_kinds.len())]));
                }
            }
            let id = format!("v{:04}", videos.len() + members.len());
            let render_seed = rng::derive(cfg.seed, &[rng::tag("synth-render"), rng::tag(&id)]);
            members.push(EmbryoPlan {
                video_id: id,
                treatment_id: treatment_id.clone(),
                length,
                timeline,
                fragmentation,
                score,
                transferred: labeled,
                success,
                label: None,
                outliers,
                render_seed,
            });
        }
        if labeled {
            let births = members.iter().filter(|m| m.success).count() as u32;
            let label = ViabilityLabel::new(size as u32, births)?;
            members.iter_mut().for_each(|m| m.label = Some(label));
        }
        videos.extend(members);
    }
    Ok(CorpusPlan { videos })
}

/// AUROC of the latent score against the binarized labels of the labeled
/// videos: the ceiling a learner that sees the latent traits perfectly can
/// approach.
pub fn oracle_auroc_bound(cfg: &SynthConfig) -> Result<f64> {
    let plan = plan_corpus(cfg)?;
    let (labels, scores): (Vec<u8>, Vec<f64>) = plan
        .videos
        .iter()
        .filter_map(|v| v.label.map(|l| (u8::from(l.n_births() > 0), v.score)))
        .unzip();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }
    auroc(&labels, &scores)
}

/// A soft-edged disk in embryo-centred pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub x: f32,
    pub y: f32,
    pub r: f32,
}

fn rotate(x: f32, y: f32, c: f32, s: f32) -> (f32, f32) {
    (c * x - s * y, s * x + c * y)
}

/// Cell blobs drawn at raw frame `t`, relative to the embryo centre.
pub fn frame_blobs(plan: &EmbryoPlan, t: usize, scale: f32) -> Vec<Blob> {
    let mut r = rng::rng(rng::derive(plan.render_seed, &[rng::tag("layout")]));
    let angle = r.random::<f64>() * core::f64::consts::TAU;
    let (c, s) = (math::cos(angle) as f32, math::sin(angle) as f32);
    let stage = plan.timeline.stage_at(t);
    let mut base: Vec<(f32, f32, f32)> = match stage {
        Stage::One => vec![(0.0, 0.0, 10.0)],
        Stage::Two => vec![(-5.0, 0.0, 7.0), (5.0, 0.0, 7.0)],
        Stage::Four => vec![(-4.5, -4.5, 5.5), (4.5, -4.5, 5.5), (-4.5, 4.5, 5.5), (4.5, 4.5, 5.5)],
        Stage::Eight => {
            let mut v: Vec<_> = (0..6)
                .map(|k| {
                    let a = k as f64 * core::f64::consts::TAU / 6.0;
                    (7.5 * math::cos(a) as f32, 7.5 * math::sin(a) as f32, 3.6)
                })
                .collect();
            v.extend([(-2.0, 0.0, 3.6), (2.0, 0.0, 3.6)]);
            v
        }
        Stage::Morula => (0..16)
            .map(|k| {
                // sunflower packing
                let rad = 9.0 * libm::sqrt((k as f64 + 0.5) / 16.0);
                let a = k as f64 * 2.399_963;
                ((rad * math::cos(a)) as f32, (rad * math::sin(a)) as f32, 2.8)
            })
            .collect(),
        Stage::Blastocyst => {
            let mut v: Vec<_> = (0..24)
                .map(|k| {
                    let a = k as f64 * core::f64::consts::TAU / 24.0;
                    (13.5 * math::cos(a) as f32, 13.5 * math::sin(a) as f32, 2.0)
                })
                .collect();
            v.extend((0..8).map(|k| {
                let a = k as f64 * core::f64::consts::TAU / 8.0;
                (-8.0 + 2.5 * math::cos(a) as f32, 2.5 * math::sin(a) as f32, 2.0)
            }));
            v
        }
    };
    // small per-frame drift of each cell
    let mut jr = rng::rng(rng::derive(plan.render_seed, &[rng::tag("drift"), t as u64]));
    for b in &mut base {
        b.0 += 0.4 * rng::normal(&mut jr) as f32;
        b.1 += 0.4 * rng::normal(&mut jr) as f32;
    }
    base.into_iter()
        .map(|(x, y, rad)| {
            let (x, y) = rotate(x, y, c, s);
            Blob { x: x * scale, y: y * scale, r: rad * scale }
        })
        .collect()
}

fn smoothstep(edge0: f32, edge1: f32, x: f32) -> f32 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Per-video static appearance: nuisance photometry, texture, fragments.
struct Scene {
    size: usize,
    scale: f32,
    cx: f32,
    cy: f32,
    brightness: f32,
    contrast: f32,
    noise: f32,
    texture: Vec<f32>,
    fragments: Vec<Blob>,
    fragments_from: usize,
}

impl Scene {
    fn new(plan: &EmbryoPlan, size: usize) -> Self {
        let mut r = rng::rng(rng::derive(plan.render_seed, &[rng::tag("scene")]));
        let scale = size as f32 / 64.0;
        let half = size as f32 / 2.0;
        let cx = half + r.random_range(-3.0f32..3.0) * scale;
        let cy = half + r.random_range(-3.0f32..3.0) * scale;
        let texture = (0..size * size).map(|_| r.random_range(-1.0f32..1.0)).collect();
        let n_frag = libm::round(plan.fragmentation * 30.0) as usize;
        let fragments = (0..n_frag)
            .map(|_| {
                let a = r.random::<f32>() * core::f32::consts::TAU;
                let d = 13.0 * libm::sqrtf(r.random::<f32>());
                Blob { x: d * libm::cosf(a) * scale, y: d * libm::sinf(a) * scale, r: 1.3 * scale }
            })
            .collect();
        Scene {
            size,
            scale,
            cx,
            cy,
            brightness: r.random_range(-0.08f32..0.08),
            contrast: r.random_range(0.75f32..1.25),
            noise: r.random_range(0.03f32..0.06),
            texture,
            fragments,
            fragments_from: plan.timeline.stage_boundaries.first().copied().unwrap_or(usize::MAX),
        }
    }

    /// Render the clean (pre-nuisance-noise) frame with the well centred at
    /// (cx + dx, cy).
    fn render(&self, plan: &EmbryoPlan, t: usize, dx: f32) -> Vec<f32> {
        let n = self.size;
        let s = self.scale;
        let (cx, cy) = (self.cx + dx, self.cy);
        let mut img = vec![0.0f32; n * n];
        let mut cells = vec![0.0f32; n * n];
        let mut frags = vec![0.0f32; n * n];
        let blastocyst = plan.timeline.stage_at(t) == Stage::Blastocyst;
        let zona_r = if blastocyst { 17.5 } else { 16.5 } * s;
        for y in 0..n {
            for x in 0..n {
                let (fx, fy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
                let d = libm::sqrtf(fx * fx + fy * fy);
                let well = smoothstep(29.0 * s + 0.8, 29.0 * s - 0.8, d);
                let zona = smoothstep(1.8 * s, 0.6 * s, (d - zona_r).abs());
                let mut v = 0.12 + 0.10 * well + 0.33 * zona;
                if blastocyst {
                    // fluid-filled cavity reads darker than the cytoplasm
                    v -= 0.05 * smoothstep(14.0 * s, 11.0 * s, d);
                }
                img[y * n + x] = v;
            }
        }
        let splat = |buf: &mut [f32], b: &Blob| {
            let (bx, by) = (cx + b.x, cy + b.y);
            let reach = b.r + 1.0;
            let x0 = libm::floorf(bx - reach).max(0.0) as usize;
            let y0 = libm::floorf(by - reach).max(0.0) as usize;
            let x1 = (libm::ceilf(bx + reach).max(0.0) as usize).min(n);
            let y1 = (libm::ceilf(by + reach).max(0.0) as usize).min(n);
            for y in y0..y1 {
                for x in x0..x1 {
                    let (fx, fy) = (x as f32 + 0.5 - bx, y as f32 + 0.5 - by);
                    let cov = smoothstep(b.r + 0.7, b.r - 0.7, libm::sqrtf(fx * fx + fy * fy));
                    let slot = &mut buf[y * n + x];
                    *slot = slot.max(cov);
                }
            }
        };
        for b in frame_blobs(plan, t, s) {
            splat(&mut cells, &b);
        }
        if t >= self.fragments_from {
            for b in &self.fragments {
                splat(&mut frags, b);
            }
        }
        for i in 0..n * n {
            img[i] += 0.42 * cells[i] * (1.0 + 0.3 * self.texture[i]) + 0.3 * frags[i];
        }
        img
    }

    fn finish(&self, img: &mut [f32], r: &mut Rng) {
        for v in img.iter_mut() {
            let noisy = *v + self.noise * rng::normal(r) as f32;
            *v = quantize(self.contrast * (noisy - 0.3) + 0.3 + self.brightness);
        }
    }
}

/// Clamp to [0, 1] and round to the 8-bit grid, so frames written to disk
/// reload bit-identically.
pub fn quantize(v: f32) -> f32 {
    libm::roundf(v.clamp(0.0, 1.0) * 255.0) / 255.0
}

fn box_blur(img: &[f32], n: usize, radius: usize) -> Vec<f32> {
    let pass = |src: &[f32], horizontal: bool| {
        let mut out = vec![0.0f32; n * n];
        for a in 0..n {
            for b in 0..n {
                let lo = b.saturating_sub(radius);
                let hi = (b + radius).min(n - 1);
                let mut acc = 0.0;
                for k in lo..=hi {
                    acc += if horizontal { src[a * n + k] } else { src[k * n + a] };
                }
                let v = acc / (hi - lo + 1) as f32;
                if horizontal {
                    out[a * n + b] = v;
                } else {
                    out[b * n + a] = v;
                }
            }
        }
        out
    };
    pass(&pass(img, true), false)
}

/// Render every frame of one planned video.
pub fn render_video(cfg: &SynthConfig, plan: &EmbryoPlan) -> VideoSample {
    let n = cfg.frame_size;
    let scene = Scene::new(plan, n);
    let mut noise = rng::rng(rng::derive(plan.render_seed, &[rng::tag("noise")]));
    let mut frames = Vec::with_capacity(plan.length);
    let mut outliers = plan.outliers.iter().peekable();
    for t in 0..plan.length {
        let kind = outliers.next_if(|o| o.0 == t).map(|o| o.1);
        let mut img = match kind {
            Some(OutlierKind::OffCenter) => scene.render(plan, t, 0.4 * n as f32),
            _ => scene.render(plan, t, 0.0),
        };
        scene.finish(&mut img, &mut noise);
        match kind {
            Some(OutlierKind::Blank) => img.iter_mut().for_each(|v| *v = quantize(0.5)),
            Some(OutlierKind::LowExposure) => img.iter_mut().for_each(|v| *v = quantize(*v * 0.05)),
            Some(OutlierKind::Blur) => img = box_blur(&img, n, 7).into_iter().map(quantize).collect(),
            Some(OutlierKind::Debris) => {
                let mut r = rng::rng(rng::derive(plan.render_seed, &[rng::tag("debris"), t as u64]));
                for _ in 0..(n * n / 40) {
                    let i = r.random_range(0..n * n);
                    img[i] = if r.random::<bool>() { 1.0 } else { 0.0 };
                }
            }
            _ => {}
        }
        frames.push(Frame { height: n, width: n, pixels: img, time_index: t as u32 });
    }
    VideoSample {
        video_id: plan.video_id.clone(),
        treatment_id: plan.treatment_id.clone(),
        frames,
        transferred: plan.transferred,
        label: plan.label,
    }
}

/// Sidecar text: one outlier frame index per line.
pub fn outlier_sidecar(plan: &EmbryoPlan) -> String {
    plan.outliers.iter().map(|(t, _)| format!("{t}\n")).collect()
}

pub fn parse_outlier_sidecar(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad frame index `{l}`") })
        })
        .collect()
}

impl core::fmt::Display for Stage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Stage::One => "1-cell",
            Stage::Two => "2-cell",
            Stage::Four => "4-cell",
            Stage::Eight => "8-cell",
            Stage::Morula => "morula",
            Stage::Blastocyst => "blastocyst",
        };
        f.write_str(s)
    }
}

impl core::fmt::Display for OutlierKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}
