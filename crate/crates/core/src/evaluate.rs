//! AUROC, label binarization, cross-validation and embedding export.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::config::{Ablation, RunConfig};
use crate::data::{split_folds, DatasetManifest, VideoSample, ViabilityLabel};
use crate::encoders::{ClassifierHead, EmbeddingSequence, SpatialEncoder, TemporalEncoder, VideoEmbedding};
use crate::error::{Error, Result};
use crate::pipeline::{self, Clock, EmbeddingCache, Labeled, StageOutcome};
use crate::rng;

/// Mann-Whitney AUROC: probability that a random positive outranks a random
/// negative, ties counted one half. O(n log n) via average ranks.
pub fn auroc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch(format!("{} labels vs {} scores", labels.len(), scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auroc scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based, tie-averaged) ranks of positives, kept doubled to stay integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u128; // twice the average rank
        let pos_here = order[i..=j].iter().filter(|&&k| labels[k] != 0).count() as u128;
        rank_sum2 += avg2 * pos_here;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    // U = R - p(p+1)/2 ; AUROC = U / (p n), all doubled
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// A label is positive when at least one birth resulted from the transfer.
pub fn binarize(label: &ViabilityLabel) -> u8 {
    u8::from(label.n_births() > 0)
}

pub fn binarize_labels(samples: &[VideoSample]) -> Result<Vec<u8>> {
    samples
        .iter()
        .map(|s| s.label.as_ref().map(binarize).ok_or_else(|| Error::MissingLabel(s.video_id.clone())))
        .collect()
}

/// Where cross-validation reads label values from. Fold assignment only
/// needs to know which videos are labeled; values are read through this
/// trait so that access can be audited.
pub trait LabelSource {
    fn label(&self, video_id: &str) -> Option<ViabilityLabel>;
}

impl LabelSource for DatasetManifest {
    fn label(&self, video_id: &str) -> Option<ViabilityLabel> {
        self.get(video_id).ok().and_then(|r| r.label)
    }
}

impl LabelSource for BTreeMap<String, ViabilityLabel> {
    fn label(&self, video_id: &str) -> Option<ViabilityLabel> {
        self.get(video_id).copied()
    }
}

/// Progress of a cross-validation run, in order of occurrence.
#[derive(Debug, Clone, PartialEq)]
pub enum CvEvent {
    Pretrained { repeat: usize, fold: Option<usize>, spatial: Option<f64>, temporal: Option<f64> },
    FinetuneStart { repeat: usize, fold: usize, n_train: usize },
    EvaluateStart { repeat: usize, fold: usize, n_test: usize },
    FoldDone { repeat: usize, fold: usize, auroc: Option<f64> },
}

/// Spatial and temporal encoders after the pre-training stages an ablation
/// asks for; skipped stages leave the seeded random initialization.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub fs: SpatialEncoder,
    pub ft: TemporalEncoder,
    pub spatial: Option<StageOutcome>,
    pub temporal: Option<StageOutcome>,
    pub cache: EmbeddingCache,
}

pub fn pretrain(cfg: &RunConfig, videos: &[&VideoSample], ablation: Ablation, seed: u64, clock: Clock) -> Result<Pretrained> {
    pretrain_with(cfg, videos, ablation, seed, clock, &mut SpatialMemo::default())
}

/// Spatial stages already run, keyed by the configuration (ablation tag
/// aside), seed and video pool. Arms of an ablation study that differ only
/// in the temporal stage then share one spatial run.
#[derive(Debug, Clone, Default)]
pub struct SpatialMemo {
    entries: BTreeMap<String, (SpatialEncoder, StageOutcome)>,
    pub hits: usize,
}

impl SpatialMemo {
    fn key(cfg: &RunConfig, videos: &[&VideoSample], seed: u64) -> String {
        let mut c = cfg.clone();
        c.eval.ablation = Ablation::TwoStage;
        let mut ids = String::new();
        for v in videos {
            ids.push_str(&v.video_id);
            ids.push('\n');
        }
        format!("{}:{seed}:{}", c.fingerprint(), pipeline::hex(&pipeline::sha256(ids.as_bytes())))
    }
}

pub fn pretrain_with(
    cfg: &RunConfig,
    videos: &[&VideoSample],
    ablation: Ablation,
    seed: u64,
    clock: Clock,
    memo: &mut SpatialMemo,
) -> Result<Pretrained> {
    let views = cfg.views();
    let pool = videos;
    let mut fs = SpatialEncoder::new(&cfg.spatial_arch, rng::derive(seed, &[rng::tag("spatial-init")]))?;
    let spatial = if ablation.spatial() {
        let key = SpatialMemo::key(cfg, pool, seed);
        if let Some((trained, outcome)) = memo.entries.get(&key) {
            memo.hits += 1;
            fs = trained.clone();
            Some(outcome.clone())
        } else {
            let st = pipeline::StageConfig { seed: rng::derive(seed, &[rng::tag("spatial")]), ..cfg.spatial };
            let outcome = pipeline::pretrain_spatial(pool, &mut fs, &st, &views, &cfg.loss, clock)?;
            memo.entries.insert(key, (fs.clone(), outcome.clone()));
            Some(outcome)
        }
    } else {
        None
    };
    let mut cache = if cfg.eval.cache_embeddings { EmbeddingCache::for_encoder(&fs) } else { EmbeddingCache::disabled() };
    let mut ft = TemporalEncoder::new(&cfg.temporal_arch, rng::derive(seed, &[rng::tag("temporal-init")]))?;
    let temporal = if ablation.temporal() {
        let st = pipeline::StageConfig { seed: rng::derive(seed, &[rng::tag("temporal")]), ..cfg.temporal };
        Some(pipeline::pretrain_temporal(pool, &fs, &mut ft, &st, &views, &cfg.loss, &mut cache, clock)?)
    } else {
        None
    };
    Ok(Pretrained { fs, ft, spatial, temporal, cache })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_positive: usize,
    /// `None` when the held-out fold has a single class.
    pub auroc: Option<f64>,
    /// (video id, predicted probability, binary label) for every test video.
    pub predictions: Vec<(String, f64, u8)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Mean AUROC over the folds that could be scored.
    pub mean_auroc: f64,
}

/// Mean and normal-approximation 95% half-width `1.96 · sd / √n` (sample
/// standard deviation; zero for a single value).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub ci: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
        let ci = if n > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            1.96 * libm::sqrt(var) / libm::sqrt(n as f64)
        } else {
            0.0
        };
        Summary { values: xs.to_vec(), mean, ci }
    }
}

impl core::fmt::Display for Summary {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.ci)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub ablation: Ablation,
    pub sampling: &'static str,
    pub augmentation: &'static str,
    pub folds: usize,
    pub fingerprint: String,
    pub repeats: Vec<RepeatResult>,
    /// Per-fold AUROC across repeats (`values` holds one entry per repeat
    /// in which the fold could be scored).
    pub per_fold: Vec<Summary>,
    /// Mean of per-repeat AUROCs, CI across repeats.
    pub overall: Summary,
    pub warnings: Vec<String>,
}

impl CrossValReport {
    /// Plain-text table for people.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ablation      {}", self.ablation.name());
        let _ = writeln!(s, "sampling      {}", self.sampling);
        let _ = writeln!(s, "augmentation  {}", self.augmentation);
        let _ = writeln!(s, "folds         {}", self.folds);
        let _ = writeln!(s, "repeats       {}", self.repeats.len());
        let _ = writeln!(s, "config        {}", self.fingerprint);
        let _ = writeln!(s);
        let _ = writeln!(s, "fold  auroc (mean ± 1.96 se over repeats)");
        for (i, f) in self.per_fold.iter().enumerate() {
            let _ = writeln!(s, "{:>4}  {}", i, f);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "AUROC {}", self.overall);
        for w in &self.warnings {
            let _ = writeln!(s, "note: {w}");
        }
        s
    }

    /// One JSON object per scored fold and repeat, then a summary object.
    pub fn to_jsonl(&self) -> String {
        let num = |x: Option<f64>| x.filter(|v| v.is_finite()).map_or("null".to_string(), |v| format!("{v:.6}"));
        let mut s = String::new();
        for r in &self.repeats {
            for f in &r.folds {
                let _ = writeln!(
                    s,
                    r#"{{"type":"fold","ablation":"{}","repeat":{},"fold":{},"n_train":{},"n_test":{},"n_positive":{},"auroc":{}}}"#,
                    self.ablation.name(),
                    r.repeat,
                    f.fold,
                    f.n_train,
                    f.n_test,
                    f.n_positive,
                    num(f.auroc)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"{{"type":"summary","ablation":"{}","sampling":"{}","augmentation":"{}","folds":{},"repeats":{},"auroc":{},"ci95":{},"config":"{}"}}"#,
            self.ablation.name(),
            self.sampling,
            self.augmentation,
            self.folds,
            self.repeats.len(),
            num(Some(self.overall.mean)),
            num(Some(self.overall.ci)),
            self.fingerprint
        );
        s
    }
}

/// Grouped k-fold cross-validation repeated `cfg.eval.repeats` times.
///
/// Pre-training uses pixels only. Unless `exclude_test_pixels_from_ssl` is set, it
/// runs once per repeat over every video and is shared by all folds.
/// Fine-tuning reads labels of the training folds only; held-out labels
/// are read after that fold's predictions exist.
pub fn run_crossval(
    cfg: &RunConfig,
    videos: &[VideoSample],
    manifest: &DatasetManifest,
    labels: &dyn LabelSource,
    clock: Clock,
    events: &mut dyn FnMut(&CvEvent),
) -> Result<CrossValReport> {
    run_crossval_with(cfg, videos, manifest, labels, clock, events, &mut SpatialMemo::default())
}

/// [`run_crossval`] reusing spatial stages recorded in `memo`.
pub fn run_crossval_with(
    cfg: &RunConfig,
    videos: &[VideoSample],
    manifest: &DatasetManifest,
    labels: &dyn LabelSource,
    clock: Clock,
    events: &mut dyn FnMut(&CvEvent),
    memo: &mut SpatialMemo,
) -> Result<CrossValReport> {
    cfg.validate()?;
    let folds = split_folds(manifest, cfg.eval.folds, cfg.seed)?;
    let by_id: BTreeMap<&str, &VideoSample> = videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    for f in &folds {
        for id in f {
            by_id.get(id.as_str()).ok_or_else(|| Error::MissingId(id.clone()))?;
        }
    }
    let views = cfg.views();
    let ablation = cfg.eval.ablation;
    let mut warnings = Vec::new();
    let mut repeats = Vec::new();
    for r in 0..cfg.eval.repeats {
        let seed = rng::derive(cfg.seed, &[rng::tag("repeat"), r as u64]);
        let mut shared = None;
        if !cfg.eval.exclude_test_pixels_from_ssl {
            let all: Vec<&VideoSample> = videos.iter().collect();
            let p = pretrain_with(cfg, &all, ablation, seed, clock, memo)?;
            events(&CvEvent::Pretrained { repeat: r, fold: None, spatial: last_loss(&p.spatial), temporal: last_loss(&p.temporal) });
            shared = Some(p);
        }
        let mut results = Vec::new();
        for (fi, test_ids) in folds.iter().enumerate() {
            let held: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
            let mut own;
            let pre = match shared.as_mut() {
                Some(p) => p,
                None => {
                    let pool: Vec<&VideoSample> = videos.iter().filter(|v| !held.contains(v.video_id.as_str())).collect();
                    own = pretrain_with(cfg, &pool, ablation, rng::derive(seed, &[rng::tag("fold"), fi as u64]), clock, memo)?;
                    events(&CvEvent::Pretrained {
                        repeat: r,
                        fold: Some(fi),
                        spatial: last_loss(&own.spatial),
                        temporal: last_loss(&own.temporal),
                    });
                    &mut own
                }
            };
            let train_ids: Vec<&String> = folds.iter().enumerate().filter(|&(j, _)| j != fi).flat_map(|(_, f)| f).collect();
            events(&CvEvent::FinetuneStart { repeat: r, fold: fi, n_train: train_ids.len() });
            let mut train = Vec::with_capacity(train_ids.len());
            for id in &train_ids {
                let l = labels.label(id).ok_or_else(|| Error::MissingLabel((*id).clone()))?;
                train.push(Labeled { video: by_id[id.as_str()], target: l.p() });
            }
            let mut ft = pre.ft.clone();
            let mut fc = ClassifierHead::new(cfg.temporal_arch.width, cfg.head_hidden, rng::derive(seed, &[rng::tag("head"), fi as u64]));
            let st = pipeline::StageConfig { seed: rng::derive(seed, &[rng::tag("finetune"), fi as u64]), ..cfg.finetune };
            pipeline::finetune(&train, &pre.fs, &mut ft, &mut fc, &st, &views, &cfg.loss, &mut pre.cache, clock)?;

            events(&CvEvent::EvaluateStart { repeat: r, fold: fi, n_test: test_ids.len() });
            let mut scores = Vec::with_capacity(test_ids.len());
            for id in test_ids {
                scores.push(pipeline::predict(&pre.fs, &ft, &fc, &views, &mut pre.cache, by_id[id.as_str()])?);
            }
            let mut y = Vec::with_capacity(test_ids.len());
            for id in test_ids {
                y.push(binarize(&labels.label(id).ok_or_else(|| Error::MissingLabel(id.clone()))?));
            }
            let auroc = match auroc(&y, &scores) {
                Ok(a) => Some(a),
                Err(Error::SingleClass) => {
                    warnings.push(format!("repeat {r} fold {fi}: held-out labels are a single class; fold skipped"));
                    None
                }
                Err(e) => return Err(e),
            };
            events(&CvEvent::FoldDone { repeat: r, fold: fi, auroc });
            results.push(FoldResult {
                fold: fi,
                n_train: train.len(),
                n_test: test_ids.len(),
                n_positive: y.iter().filter(|&&b| b == 1).count(),
                auroc,
                predictions: test_ids.iter().zip(&scores).zip(&y).map(|((id, &s), &b)| (id.clone(), s, b)).collect(),
            });
        }
        let scored: Vec<f64> = results.iter().filter_map(|f| f.auroc).collect();
        if scored.is_empty() {
            return Err(Error::DegenerateLabels);
        }
        repeats.push(RepeatResult { repeat: r, seed, mean_auroc: scored.iter().sum::<f64>() / scored.len() as f64, folds: results });
    }
    let per_fold = (0..folds.len())
        .map(|f| Summary::of(&repeats.iter().filter_map(|r| r.folds[f].auroc).collect::<Vec<_>>()))
        .collect();
    let overall = Summary::of(&repeats.iter().map(|r| r.mean_auroc).collect::<Vec<_>>());
    let n_test: usize = folds.iter().map(Vec::len).sum();
    if repeats.len() < 5 || n_test < 100 {
        warnings.push(format!(
            "small sample: {} labeled videos and {} repeats; the interval reflects seed variation only and is approximate",
            n_test,
            repeats.len()
        ));
    }
    Ok(CrossValReport {
        ablation,
        sampling: cfg.sampling.name(),
        augmentation: if cfg.augment.temporally_consistent { "consistent" } else { "per-frame" },
        folds: folds.len(),
        fingerprint: cfg.fingerprint(),
        repeats,
        per_fold,
        overall,
        warnings,
    })
}

fn last_loss(o: &Option<StageOutcome>) -> Option<f64> {
    o.as_ref().and_then(|o| o.log.last()).map(|l| l.loss)
}

/// Tab-separated embedding table: id, treatment, label (or `-`), then one
/// column per dimension.
pub fn embedding_table(rows: &[(&VideoSample, VideoEmbedding)]) -> String {
    let width = rows.first().map_or(0, |(_, z)| z.width());
    let mut s = String::from("video_id\ttreatment_id\tlabel");
    for d in 0..width {
        let _ = write!(s, "\tz{d}");
    }
    s.push('\n');
    for (v, z) in rows {
        let label = v.label.as_ref().map_or("-".to_string(), |l| format!("{}/{}", l.n_births(), l.n_transferred()));
        let _ = write!(s, "{}\t{}\t{}", v.video_id, v.treatment_id, label);
        for x in &z.0 {
            let _ = write!(s, "\t{x:.6}");
        }
        s.push('\n');
    }
    s
}

/// Frame-level table: id, time index, then one column per dimension.
/// `rows` pairs each video with the embedding of every one of its frames.
pub fn frame_embedding_table(rows: &[(&VideoSample, EmbeddingSequence)]) -> Result<String> {
    let width = rows.first().map_or(0, |(_, e)| e.width());
    let mut s = String::from("video_id\ttime_index");
    for d in 0..width {
        let _ = write!(s, "\tz{d}");
    }
    s.push('\n');
    for (v, e) in rows {
        if e.len() != v.len() {
            return Err(Error::ShapeMismatch(format!("{}: {} embeddings for {} frames", v.video_id, e.len(), v.len())));
        }
        for (i, f) in v.frames.iter().enumerate() {
            let _ = write!(s, "{}\t{}", v.video_id, f.time_index);
            for x in e.row(i) {
                let _ = write!(s, "\t{x:.6}");
            }
            s.push('\n');
        }
    }
    Ok(s)
}

/// AUROC of a trained model on one labeled split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEval {
    pub auroc: f64,
    /// (video id, predicted viability, binarized label)
    pub predictions: Vec<(String, f64, u8)>,
}

pub fn evaluate_split(
    fs: &SpatialEncoder,
    ft: &TemporalEncoder,
    fc: &ClassifierHead,
    views: &pipeline::ViewConfig,
    cache: &mut EmbeddingCache,
    videos: &[&VideoSample],
) -> Result<SplitEval> {
    let mut predictions = Vec::with_capacity(videos.len());
    for v in videos {
        let l = v.label.as_ref().ok_or_else(|| Error::MissingLabel(v.video_id.clone()))?;
        predictions.push((v.video_id.clone(), pipeline::predict(fs, ft, fc, views, cache, v)?, binarize(l)));
    }
    let y: Vec<u8> = predictions.iter().map(|p| p.2).collect();
    let s: Vec<f64> = predictions.iter().map(|p| p.1).collect();
    Ok(SplitEval { auroc: auroc(&y, &s)?, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::preprocess_video;
    use crate::synth::{plan_corpus, render_video};
    use alloc::vec;
    use core::cell::RefCell;
    use rand::Rng as _;

    /// Exhaustive pairwise counting, ties one half.
    fn pairwise(labels: &[u8], scores: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    den += 1.0;
                    num += match scores[i].total_cmp(&scores[j]) {
                        core::cmp::Ordering::Greater => 1.0,
                        core::cmp::Ordering::Equal => 0.5,
                        core::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1]).unwrap(), 0.75);
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(auroc(&[0, 1, 1, 0, 1], &[0.3; 5]).unwrap(), 0.5);
        assert_eq!(auroc(&[1, 1], &[0.1, 0.2]), Err(Error::SingleClass));
        assert!(matches!(auroc(&[1, 0], &[0.1]), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn auroc_properties() {
        let mut r = rng::rng(7);
        for case in 0..100 {
            let n = r.random_range(2..40usize);
            let mut y: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
            y[0] = 1;
            y[1] = 0;
            // coarse scores force ties
            let s: Vec<f64> = (0..n).map(|_| r.random_range(0..6u32) as f64 / 5.0 - 0.5).collect();
            let a = auroc(&y, &s).unwrap();
            assert!((a - pairwise(&y, &s)).abs() < 1e-12, "case {case}");
            let squashed: Vec<f64> = s.iter().map(|&x| crate::math::sigmoid(3.0 * x)).collect();
            assert!((auroc(&y, &squashed).unwrap() - a).abs() < 1e-12);
            let swapped: Vec<u8> = y.iter().map(|&l| 1 - l).collect();
            assert!((auroc(&swapped, &s).unwrap() - (1.0 - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn binarization() {
        let l = |t, b| ViabilityLabel::new(t, b).unwrap();
        assert_eq!(binarize(&l(2, 1)), 1);
        assert_eq!(binarize(&l(2, 0)), 0);
        assert_eq!(binarize(&l(3, 3)), 1);
    }

    #[test]
    fn summary_interval() {
        assert_eq!(Summary::of(&[0.7]).ci, 0.0);
        let s = Summary::of(&[0.6, 0.7, 0.8]);
        assert!((s.mean - 0.7).abs() < 1e-12);
        assert!((s.ci - 1.96 * 0.1 / 3f64.sqrt()).abs() < 1e-12);
    }

    pub(crate) fn tiny() -> (RunConfig, Vec<VideoSample>, DatasetManifest) {
        let mut cfg = RunConfig::desk();
        cfg.apply([
            ("synth.n_videos", "30"),
            ("synth.frame_size", "32"),
            ("synth.length_min", "60"),
            ("synth.length_max", "80"),
            ("synth.label_fraction", "0.8"),
            ("preprocess.resize_to", "16"),
            ("sampling.view_pool", "2"),
            ("model.spatial", "conv(input=16,channels=4-8,width=8)"),
            ("model.temporal", "transformer(width=8,layers=1,heads=2,mlp=16,max_len=32,pooling=mean)"),
            ("model.head_hidden", "4"),
            ("stage.spatial.epochs", "1"),
            ("stage.temporal.epochs", "1"),
            ("stage.temporal.batch_size", "8"),
            ("stage.finetune.epochs", "1"),
            ("eval.folds", "3"),
            ("eval.repeats", "2"),
        ])
        .unwrap();
        let plan = plan_corpus(&cfg.synth).unwrap();
        let videos = plan.videos.iter().map(|p| preprocess_video(&render_video(&cfg.synth, p), &cfg.preprocess, false).unwrap().0).collect();
        (cfg, videos, plan.manifest())
    }

    #[derive(Debug, Clone, PartialEq)]
    enum Seen {
        Event(CvEvent),
        Label(String),
    }

    struct Audited<'a> {
        inner: &'a DatasetManifest,
        log: &'a RefCell<Vec<Seen>>,
    }

    impl LabelSource for Audited<'_> {
        fn label(&self, video_id: &str) -> Option<ViabilityLabel> {
            self.log.borrow_mut().push(Seen::Label(video_id.into()));
            self.inner.label(video_id)
        }
    }

    #[test]
    fn held_out_labels_are_read_only_after_prediction() {
        let (cfg, videos, manifest) = tiny();
        let log = RefCell::new(Vec::new());
        let labels = Audited { inner: &manifest, log: &log };
        let rep = run_crossval(&cfg, &videos, &manifest, &labels, None, &mut |e| log.borrow_mut().push(Seen::Event(e.clone()))).unwrap();
        let folds = split_folds(&manifest, cfg.eval.folds, cfg.seed).unwrap();
        let log = log.into_inner();
        let mut checked = 0;
        for r in 0..cfg.eval.repeats {
            for (f, held) in folds.iter().enumerate() {
                let at = |e: &CvEvent| log.iter().position(|s| *s == Seen::Event(e.clone())).unwrap();
                let start = at(&CvEvent::FinetuneStart { repeat: r, fold: f, n_train: manifest.labeled().count() - held.len() });
                let eval = at(&CvEvent::EvaluateStart { repeat: r, fold: f, n_test: held.len() });
                for s in &log[start..eval] {
                    if let Seen::Label(id) = s {
                        assert!(!held.contains(id), "held-out label {id} read before evaluation");
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
        // before any fine-tuning nothing is read at all
        let first = log.iter().position(|s| matches!(s, Seen::Label(_))).unwrap();
        assert!(log[..first].iter().any(|s| matches!(s, Seen::Event(CvEvent::FinetuneStart { .. }))));
        assert_eq!(rep.repeats.len(), 2);
    }

    #[test]
    fn crossval_is_deterministic_and_honours_ablation() {
        let (mut cfg, videos, manifest) = tiny();
        cfg.eval.repeats = 1;
        cfg.eval.ablation = Ablation::None;
        let mut pre = Vec::new();
        let a = run_crossval(&cfg, &videos, &manifest, &manifest, None, &mut |e| {
            if let CvEvent::Pretrained { spatial, temporal, .. } = e {
                pre.push((*spatial, *temporal));
            }
        })
        .unwrap();
        assert_eq!(pre, vec![(None, None)]);
        assert_eq!(a.overall.ci, 0.0);
        assert!(a.to_text().contains("none"));
        let b = run_crossval(&cfg, &videos, &manifest, &manifest, None, &mut |_| {}).unwrap();
        // an all-skipped fold has a NaN mean, so compare renderings
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.to_text(), b.to_text());
        let preds: usize = a.repeats[0].folds.iter().map(|f| f.predictions.len()).sum();
        assert_eq!(preds, manifest.labeled().count());
    }

    #[test]
    fn memo_shares_spatial_stage_between_arms() {
        let (mut cfg, videos, manifest) = tiny();
        cfg.eval.repeats = 1;
        let mut memo = SpatialMemo::default();
        let mut spatial_losses = Vec::new();
        let mut reports = Vec::new();
        for ab in [Ablation::TwoStage, Ablation::SpatialOnly] {
            cfg.eval.ablation = ab;
            let mut log = |e: &CvEvent| {
                if let CvEvent::Pretrained { spatial, .. } = e {
                    spatial_losses.push(*spatial);
                }
            };
            reports.push(run_crossval_with(&cfg, &videos, &manifest, &manifest, None, &mut log, &mut memo).unwrap());
        }
        assert_eq!(memo.hits, 1);
        assert_eq!(spatial_losses[0], spatial_losses[1]);
        let fresh = run_crossval(&cfg, &videos, &manifest, &manifest, None, &mut |_| {}).unwrap();
        assert_eq!(format!("{fresh:?}"), format!("{:?}", reports[1]));
    }

    #[test]
    fn strict_protocol_pretrains_per_fold() {
        let (mut cfg, videos, manifest) = tiny();
        cfg.eval.repeats = 1;
        cfg.eval.ablation = Ablation::SpatialOnly;
        cfg.eval.exclude_test_pixels_from_ssl = true;
        let mut folds = Vec::new();
        run_crossval(&cfg, &videos, &manifest, &manifest, None, &mut |e| {
            if let CvEvent::Pretrained { fold, spatial, .. } = e {
                assert!(spatial.is_some());
                folds.push(*fold);
            }
        })
        .unwrap();
        assert_eq!(folds, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn embedding_tables() {
        let (cfg, videos, _) = tiny();
        let fs = SpatialEncoder::new(&cfg.spatial_arch, 1).unwrap();
        let ft = TemporalEncoder::new(&cfg.temporal_arch, 2).unwrap();
        let two: Vec<VideoSample> = videos[..2].iter().map(|v| v.with_frames(v.frames[..5].to_vec())).collect();
        let rows: Vec<_> = two.iter().map(|v| (v, fs.encode_frames(v).unwrap())).collect();
        let t = frame_embedding_table(&rows).unwrap();
        assert_eq!(t.lines().count(), 1 + 10);
        assert!(t.lines().skip(1).all(|l| l.split('\t').count() == 2 + cfg.spatial_arch.width()));
        assert_eq!(t, frame_embedding_table(&rows).unwrap());
        let mut cache = EmbeddingCache::disabled();
        let views = cfg.views();
        let rows: Vec<_> = two.iter().map(|v| (v, pipeline::embed_video(&fs, &ft, &views, &mut cache, v).unwrap())).collect();
        let t = embedding_table(&rows);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().all(|l| l.split('\t').count() == 3 + cfg.temporal_arch.width));
    }
}
