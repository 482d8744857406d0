//! The `stpt` command line.
//!
//! Every command resolves the layered config, prints its fingerprint and
//! writes its artifacts under `<runs>/<fingerprint>/`. With
//! `STPT_DETERMINISTIC=1` recorded wall-clock times are zero, so reruns
//! produce byte-identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use stpt_core::config::{Ablation, RunConfig, DESK_PRESET, KEYS};
use stpt_core::data::{split_folds, DatasetManifest, VideoSample};
use stpt_core::encoders::{ClassifierHead, SpatialEncoder, TemporalEncoder};
use stpt_core::evaluate;
use stpt_core::pipeline::{self, Clock, EmbeddingCache, Labeled, StageCheckpoint, StageKind, StageOutcome};
use stpt_core::preprocess::preprocess_video;
use stpt_core::rng;

use crate::io::{self, Corpus, Error, Result};
use crate::settings;

#[derive(Parser, Debug)]
#[command(name = "stpt", version, about = "Two-stage spatial/temporal pre-training for time-lapse embryo videos")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML config file layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Parent of the per-fingerprint run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub runs: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render the synthetic corpus.
    GenData {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter, clip and resize a corpus into a mirror; write a removal report.
    Preprocess {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatial alignment pre-training.
    PretrainSpatial {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out_ckpt: Option<PathBuf>,
    },
    /// Contrastive temporal pre-training on a frozen spatial encoder.
    PretrainTemporal {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        spatial_ckpt: Option<PathBuf>,
        /// Use the seeded random spatial encoder instead of a checkpoint.
        #[arg(long)]
        random_spatial: bool,
        #[arg(long)]
        out_ckpt: Option<PathBuf>,
    },
    /// Fine-tune the temporal encoder and viability head on labeled videos.
    Finetune {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        spatial_ckpt: Option<PathBuf>,
        /// Without it the temporal encoder starts from its seeded random init.
        #[arg(long)]
        temporal_ckpt: Option<PathBuf>,
        #[arg(long)]
        random_spatial: bool,
        /// Leave this cross-validation fold out of training.
        #[arg(long)]
        holdout_fold: Option<usize>,
        #[arg(long)]
        out_ckpt: Option<PathBuf>,
    },
    /// AUROC of a fine-tuned checkpoint on one split.
    Evaluate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
        /// Evaluate on this fold only; default is every labeled video.
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Repeated grouped k-fold cross-validation.
    Crossval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = ["two-stage", "spatial-only", "temporal-only", "none"])]
        ablation: Option<String>,
        #[arg(long)]
        aug: Option<AugMode>,
        #[arg(long)]
        sampling: Option<SamplingMode>,
    },
    /// Write frame- or video-level embeddings as a tab-separated table.
    ExportEmbeddings {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        level: Level,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trainable, frozen and optimizer-state parameter counts per stage.
    ReportTrainable,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum AugMode {
    Consistent,
    PerFrame,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SamplingMode {
    Uniform,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Frame,
    Video,
}

/// Every config key with its default, desk-preset value and provenance.
pub fn keys_help() -> String {
    let d = RunConfig::default();
    let mut s = String::from("Config keys (default; desk preset where different; provenance):\n");
    for k in KEYS {
        let _ = write!(s, "  {} = {}", k.key, d.get(k.key).expect("listed keys resolve"));
        if let Some((_, v)) = DESK_PRESET.iter().find(|(key, _)| *key == k.key) {
            let _ = write!(s, "  (desk: {v})");
        }
        let _ = writeln!(s, "  [{}]\n      {}", k.provenance, k.help);
    }
    s.push_str("\nEnvironment: STPT_DETERMINISTIC=1 records zero wall-clock times so reruns are byte-identical.\n");
    s
}

pub fn deterministic() -> bool {
    std::env::var("STPT_DETERMINISTIC").is_ok_and(|v| v == "1")
}

fn elapsed() -> f64 {
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_secs_f64()
}

fn clock() -> Clock {
    if deterministic() {
        None
    } else {
        Some(elapsed)
    }
}

/// Resolved config plus its run directory.
pub struct Run {
    pub cfg: RunConfig,
    pub fingerprint: String,
    pub dir: PathBuf,
}

impl Run {
    fn open(global: &Global, extra: &[(String, String)], out: &mut dyn std::io::Write) -> Result<Run> {
        let mut overrides = global.set.iter().map(|s| settings::parse_override(s)).collect::<Result<Vec<_>>>()?;
        overrides.extend_from_slice(extra);
        let cfg = settings::resolve(global.config.as_deref(), &overrides)?;
        let fingerprint = cfg.fingerprint();
        let dir = global.runs.join(&fingerprint);
        io::write_text(&dir.join("config.txt"), &cfg.resolved_text())?;
        say(out, &format!("fingerprint {fingerprint}"));
        Ok(Run { cfg, fingerprint, dir })
    }

    fn artifact(&self, explicit: Option<&PathBuf>, name: &str) -> PathBuf {
        explicit.cloned().unwrap_or_else(|| self.dir.join(name))
    }

    /// Corpus at `data.dir`, preprocessed without subsampling: frames are
    /// selected per view so uniform and random sampling share one input.
    fn load_data(&self) -> Result<(Corpus, Vec<VideoSample>)> {
        let corpus = io::load_manifest(Path::new(&self.cfg.data_dir))?;
        let mut videos = Vec::with_capacity(corpus.manifest.records.len());
        for r in &corpus.manifest.records {
            let raw = corpus.load_video(&r.video_id)?;
            videos.push(preprocess_video(&raw, &self.cfg.preprocess, false)?.0);
        }
        Ok((corpus, videos))
    }

    fn seed(&self, tag: &str) -> u64 {
        rng::derive(self.cfg.seed, &[rng::tag(tag)])
    }

    fn random_spatial(&self) -> Result<SpatialEncoder> {
        Ok(SpatialEncoder::new(&self.cfg.spatial_arch, self.seed("spatial-init"))?)
    }

    fn random_temporal(&self) -> Result<TemporalEncoder> {
        Ok(TemporalEncoder::new(&self.cfg.temporal_arch, self.seed("temporal-init"))?)
    }

    fn cache(&self, fs: &SpatialEncoder) -> EmbeddingCache {
        if self.cfg.eval.cache_embeddings {
            EmbeddingCache::for_encoder(fs)
        } else {
            EmbeddingCache::disabled()
        }
    }

    fn save(&self, path: &Path, ck: &StageCheckpoint, outcome: &StageOutcome, out: &mut dyn std::io::Write) -> Result<()> {
        io::save_checkpoint(path, ck)?;
        io::write_text(&self.dir.join(format!("{}.log", ck.stage.name())), &outcome.log_text())?;
        if let Some(l) = outcome.log.last() {
            say(out, &format!("{} epoch {} loss {:.6}", ck.stage.name(), l.epoch, l.loss));
        }
        if outcome.skipped > 0 {
            say(out, &format!("{} videos too short for a view were skipped", outcome.skipped));
        }
        say(out, &format!("checkpoint {}", path.display()));
        Ok(())
    }
}

fn say(out: &mut dyn std::io::Write, line: &str) {
    let _ = writeln!(out, "{line}");
}

fn data_override(data: &Option<PathBuf>) -> Vec<(String, String)> {
    data.iter().map(|d| ("data.dir".to_string(), d.display().to_string())).collect()
}

/// Spatial encoder from, in order: an explicit checkpoint, the spatial part
/// of `fallback`, the run directory's `spatial.ckpt`, or the random init.
fn spatial_source(run: &Run, explicit: Option<&PathBuf>, fallback: Option<&StageCheckpoint>, random: bool) -> Result<SpatialEncoder> {
    if random {
        return run.random_spatial();
    }
    if let Some(p) = explicit {
        return Ok(io::load_checkpoint(p)?.spatial_encoder(Some(&run.cfg.spatial_arch))?);
    }
    if let Some(ck) = fallback.filter(|c| c.spatial.is_some()) {
        return Ok(ck.spatial_encoder(Some(&run.cfg.spatial_arch))?);
    }
    let default = run.dir.join("spatial.ckpt");
    if default.exists() {
        return Ok(io::load_checkpoint(&default)?.spatial_encoder(Some(&run.cfg.spatial_arch))?);
    }
    Err(stpt_core::Error::MissingSpatialCheckpoint.into())
}

fn fold_ids(manifest: &DatasetManifest, cfg: &RunConfig, fold: usize) -> Result<BTreeSet<String>> {
    let folds = split_folds(manifest, cfg.eval.folds, cfg.seed)?;
    let f = folds
        .get(fold)
        .ok_or_else(|| Error::Usage(format!("fold {fold} out of range: eval.folds is {}", folds.len())))?;
    Ok(f.iter().cloned().collect())
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GenData { out: dir } => {
            let run = Run::open(g, &data_override(dir), out)?;
            let dir = PathBuf::from(&run.cfg.data_dir);
            let m = io::generate_corpus(&run.cfg.synth, &dir)?;
            say(out, &format!("wrote {} videos ({} labeled) to {}", m.records.len(), m.labeled().count(), dir.display()));
            say(out, &format!("oracle auroc bound {:.4}", stpt_core::synth::oracle_auroc_bound(&run.cfg.synth)?));
        }
        Command::Preprocess { input, out: dest } => {
            let run = Run::open(g, &data_override(input), out)?;
            let corpus = io::load_manifest(Path::new(&run.cfg.data_dir))?;
            let mut records = Vec::new();
            let mut report = String::from("video_id\tremoved\n");
            let (mut tp, mut fp, mut fn_, mut scored) = (0usize, 0usize, 0usize, false);
            for r in &corpus.manifest.records {
                let raw = corpus.load_video(&r.video_id)?;
                let (v, removed) = preprocess_video(&raw, &run.cfg.preprocess, false)?;
                io::write_video(&dest.join(&r.path), &v)?;
                records.push(stpt_core::data::ManifestRecord { frame_count: v.len(), ..r.clone() });
                let list = removed.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
                let _ = writeln!(report, "{}\t{}", r.video_id, if list.is_empty() { "-" } else { &list });
                if let Some(truth) = corpus.outliers(&r.video_id)? {
                    scored = true;
                    let truth: BTreeSet<usize> = truth.into_iter().collect();
                    let hit = removed.iter().filter(|i| truth.contains(i)).count();
                    tp += hit;
                    fp += removed.len() - hit;
                    fn_ += truth.len() - hit;
                }
            }
            io::write_manifest(dest, &DatasetManifest::new(records)?)?;
            io::write_text(&dest.join("removal_report.tsv"), &report)?;
            io::write_text(&run.dir.join("removal_report.tsv"), &report)?;
            say(out, &format!("removed {} frames; report {}", tp + fp, dest.join("removal_report.tsv").display()));
            if scored {
                let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
                say(out, &format!("against sidecars: precision {:.4} recall {:.4}", ratio(tp, tp + fp), ratio(tp, tp + fn_)));
            }
        }
        Command::PretrainSpatial { data, out_ckpt } => {
            let run = Run::open(g, &data_override(data), out)?;
            let (_, videos) = run.load_data()?;
            let refs: Vec<&VideoSample> = videos.iter().collect();
            let mut fs = run.random_spatial()?;
            let st = pipeline::StageConfig { seed: run.seed("spatial"), ..run.cfg.spatial };
            let o = pipeline::pretrain_spatial(&refs, &mut fs, &st, &run.cfg.views(), &run.cfg.loss, clock())?;
            let ck = StageCheckpoint::new(StageKind::Spatial, st.epochs, &run.fingerprint, o.rng_state).with_spatial(&fs);
            run.save(&run.artifact(out_ckpt.as_ref(), "spatial.ckpt"), &ck, &o, out)?;
        }
        Command::PretrainTemporal { data, spatial_ckpt, random_spatial, out_ckpt } => {
            let run = Run::open(g, &data_override(data), out)?;
            let fs = spatial_source(&run, spatial_ckpt.as_ref(), None, *random_spatial)?;
            let (_, videos) = run.load_data()?;
            let refs: Vec<&VideoSample> = videos.iter().collect();
            let mut ft = run.random_temporal()?;
            let st = pipeline::StageConfig { seed: run.seed("temporal"), ..run.cfg.temporal };
            let mut cache = run.cache(&fs);
            let o = pipeline::pretrain_temporal(&refs, &fs, &mut ft, &st, &run.cfg.views(), &run.cfg.loss, &mut cache, clock())?;
            let ck = StageCheckpoint::new(StageKind::Temporal, st.epochs, &run.fingerprint, o.rng_state).with_spatial(&fs).with_temporal(&ft);
            run.save(&run.artifact(out_ckpt.as_ref(), "temporal.ckpt"), &ck, &o, out)?;
        }
        Command::Finetune { data, spatial_ckpt, temporal_ckpt, random_spatial, holdout_fold, out_ckpt } => {
            let run = Run::open(g, &data_override(data), out)?;
            let tck = temporal_ckpt.as_ref().map(|p| io::load_checkpoint(p)).transpose()?;
            let fs = spatial_source(&run, spatial_ckpt.as_ref(), tck.as_ref(), *random_spatial)?;
            let mut ft = match &tck {
                Some(ck) => ck.temporal_encoder(Some(&run.cfg.temporal_arch))?,
                None => run.random_temporal()?,
            };
            let (corpus, videos) = run.load_data()?;
            let held = match holdout_fold {
                Some(k) => fold_ids(&corpus.manifest, &run.cfg, *k)?,
                None => BTreeSet::new(),
            };
            let train: Vec<Labeled> = videos
                .iter()
                .filter(|v| !held.contains(&v.video_id))
                .filter_map(|v| v.label.map(|l| Labeled { video: v, target: l.p() }))
                .collect();
            let mut fc = ClassifierHead::new(run.cfg.temporal_arch.width, run.cfg.head_hidden, run.seed("head"));
            let st = pipeline::StageConfig { seed: run.seed("finetune"), ..run.cfg.finetune };
            let mut cache = run.cache(&fs);
            let o = pipeline::finetune(&train, &fs, &mut ft, &mut fc, &st, &run.cfg.views(), &run.cfg.loss, &mut cache, clock())?;
            say(out, &format!("fine-tuned on {} labeled videos", train.len()));
            let ck = StageCheckpoint::new(StageKind::Finetune, st.epochs, &run.fingerprint, o.rng_state)
                .with_spatial(&fs)
                .with_temporal(&ft)
                .with_head(&fc);
            let name = holdout_fold.map_or("finetune.ckpt".to_string(), |k| format!("finetune-holdout{k}.ckpt"));
            run.save(&run.artifact(out_ckpt.as_ref(), &name), &ck, &o, out)?;
        }
        Command::Evaluate { data, ckpt, fold } => {
            let run = Run::open(g, &data_override(data), out)?;
            let ck = io::load_checkpoint(ckpt)?;
            let fs = ck.spatial_encoder(Some(&run.cfg.spatial_arch))?;
            let ft = ck.temporal_encoder(Some(&run.cfg.temporal_arch))?;
            let fc = ck.head()?;
            let (corpus, videos) = run.load_data()?;
            let keep = fold.map(|k| fold_ids(&corpus.manifest, &run.cfg, k)).transpose()?;
            let split: Vec<&VideoSample> = videos
                .iter()
                .filter(|v| v.label.is_some() && keep.as_ref().is_none_or(|k| k.contains(&v.video_id)))
                .collect();
            let mut cache = EmbeddingCache::disabled();
            let e = evaluate::evaluate_split(&fs, &ft, &fc, &run.cfg.views(), &mut cache, &split)?;
            let mut text = format!("checkpoint\t{}\nsplit\t{}\nn\t{}\nauroc\t{:.6}\n", ckpt.display(), fold.map_or("all".into(), |k| format!("fold{k}")), split.len(), e.auroc);
            text.push_str("video_id\tprediction\tlabel\n");
            for (id, p, y) in &e.predictions {
                let _ = writeln!(text, "{id}\t{p:.6}\t{y}");
            }
            let name = fold.map_or("evaluate.tsv".to_string(), |k| format!("evaluate-fold{k}.tsv"));
            io::write_text(&run.dir.join(&name), &text)?;
            say(out, &format!("auroc {:.4} on {} videos", e.auroc, split.len()));
        }
        Command::Crossval { data, ablation, aug, sampling } => {
            let mut extra = data_override(data);
            if let Some(a) = ablation {
                extra.push(("eval.ablation".into(), Ablation::parse(a)?.name().into()));
            }
            if let Some(a) = aug {
                extra.push(("augment.temporally_consistent".into(), matches!(a, AugMode::Consistent).to_string()));
            }
            if let Some(s) = sampling {
                extra.push(("sampling.mode".into(), if matches!(s, SamplingMode::Uniform) { "uniform" } else { "random" }.into()));
            }
            let run = Run::open(g, &extra, out)?;
            let (corpus, videos) = run.load_data()?;
            let mut log = |e: &evaluate::CvEvent| {
                if let evaluate::CvEvent::FoldDone { repeat, fold, auroc } = e {
                    eprintln!("repeat {repeat} fold {fold}: {}", auroc.map_or("skipped".into(), |a| format!("{a:.4}")));
                }
            };
            let rep = evaluate::run_crossval(&run.cfg, &videos, &corpus.manifest, &corpus.manifest, clock(), &mut log)?;
            io::write_text(&run.dir.join("crossval.txt"), &rep.to_text())?;
            io::write_text(&run.dir.join("crossval.jsonl"), &rep.to_jsonl())?;
            let _ = out.write_all(rep.to_text().as_bytes());
        }
        Command::ExportEmbeddings { data, ckpt, level, out: dest } => {
            let run = Run::open(g, &data_override(data), out)?;
            let ck = io::load_checkpoint(ckpt)?;
            let fs = ck.spatial_encoder(Some(&run.cfg.spatial_arch))?;
            let (_, videos) = run.load_data()?;
            let table = match level {
                Level::Frame => {
                    let rows = videos.iter().map(|v| Ok((v, fs.encode_frames(v)?))).collect::<Result<Vec<_>>>()?;
                    evaluate::frame_embedding_table(&rows)?
                }
                Level::Video => {
                    let ft = ck.temporal_encoder(Some(&run.cfg.temporal_arch))?;
                    let mut cache = EmbeddingCache::disabled();
                    let views = run.cfg.views();
                    let rows = videos
                        .iter()
                        .map(|v| Ok((v, pipeline::embed_video(&fs, &ft, &views, &mut cache, v)?)))
                        .collect::<Result<Vec<_>>>()?;
                    evaluate::embedding_table(&rows)
                }
            };
            io::write_text(dest, &table)?;
            say(out, &format!("wrote {} rows to {}", table.lines().count() - 1, dest.display()));
        }
        Command::ReportTrainable => {
            let run = Run::open(g, &[], out)?;
            let fs = run.random_spatial()?;
            let ft = run.random_temporal()?;
            let fc = ClassifierHead::new(run.cfg.temporal_arch.width, run.cfg.head_hidden, run.seed("head"));
            let mut text = String::new();
            let mut trainable = Vec::new();
            for st in [run.cfg.spatial, run.cfg.temporal, run.cfg.finetune] {
                let r = pipeline::trainable_report(&st, &fs, &ft, &fc);
                trainable.push(r.trainable);
                let _ = writeln!(text, "{r}");
            }
            let _ = writeln!(text, "temporal/spatial trainable ratio {:.4}", trainable[1] as f64 / trainable[0] as f64);
            io::write_text(&run.dir.join("trainable.txt"), &text)?;
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(())
}

/// Parse `args`, run, and return the process exit code. Errors print as one
/// `error[category]: message` line on stderr.
pub fn main_with(args: impl IntoIterator<Item = String>, out: &mut dyn std::io::Write) -> i32 {
    let cmd = Cli::command().after_long_help(keys_help());
    let parsed = cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 2;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            1
        }
    }
}
