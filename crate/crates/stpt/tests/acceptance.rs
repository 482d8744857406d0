//! Acceptance criteria 1-12, run in order. Each prints one line:
//!
//! ```text
//! criterion  N PASS|FAIL  title: measured values
//! ```
//!
//! Criteria 7-9 train the full desk preset over three seeds and dominate
//! the runtime.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng as _;
use stpt::io;
use stpt::settings;
use stpt_core::config::{Ablation, RunConfig};
use stpt_core::data::VideoSample;
use stpt_core::encoders::{ClassifierHead, EmbeddingSequence, SpatialEncoder, TemporalEncoder, VideoEmbedding};
use stpt_core::evaluate::{auroc, run_crossval_with, SpatialMemo};
use stpt_core::losses::{self, LossConfig};
use stpt_core::pipeline::{self, EmbeddingCache, Labeled, Sampling, StageCheckpoint, StageKind};
use stpt_core::preprocess::{filter_outliers, preprocess_video, PreprocessConfig};
use stpt_core::rng;
use stpt_core::synth::{self, OutlierKind};

type Outcome = Result<String, String>;

/// Straight to the process stdout, so the report shows without `--nocapture`.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk_config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    settings::resolve(Some(&path), &[]).expect("desk preset resolves")
}

fn seq(width: usize, rows: &[Vec<f64>]) -> EmbeddingSequence {
    EmbeddingSequence::new(width, rows.concat()).unwrap()
}

fn random_seq(r: &mut rng::Rng, t: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..d).map(|_| scale * rng::normal(r)).collect()).collect()
}

// ---------------------------------------------------------------------------
// 1. gradient oracles

fn central_diff(x: &[f64], f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut g = Vec::with_capacity(x.len());
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = f(&y);
        y[i] = x[i] - h;
        let down = f(&y);
        y[i] = x[i];
        g.push((up - down) / (2.0 * h));
    }
    g
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, the worst relative mismatch of a gradient.
fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(n));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

fn criterion_1() -> Outcome {
    let mut r = rng::rng(101);
    let cfg = LossConfig::default();
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let (t1, t2, d) = (r.random_range(2..=6usize), r.random_range(2..=6usize), r.random_range(1..=8usize));
        let u = random_seq(&mut r, t1, d, 0.7).concat();
        let v = random_seq(&mut r, t2, d, 0.7).concat();
        let both: Vec<f64> = u.iter().chain(&v).copied().collect();
        let split = |x: &[f64]| (EmbeddingSequence::new(d, x[..t1 * d].to_vec()).unwrap(), EmbeddingSequence::new(d, x[t1 * d..].to_vec()).unwrap());
        let (su, sv) = split(&both);

        let g = losses::tcc_classification_loss_grad(&su, &sv).unwrap();
        let num = central_diff(&both, &|x| {
            let (a, b) = split(x);
            losses::tcc_classification_loss(&a, &b).unwrap()
        });
        worst[0] = worst[0].max(rel_err(&[g.du, g.dv].concat(), &num));

        let g = losses::tcc_regression_loss_grad(&su, &sv, &cfg).unwrap();
        let num = central_diff(&both, &|x| {
            let (a, b) = split(x);
            losses::tcc_regression_loss(&a, &b, &cfg).unwrap()
        });
        worst[1] = worst[1].max(rel_err(&[g.du, g.dv].concat(), &num));

        let n = r.random_range(1..=4usize);
        let tau = r.random_range(0.1..1.0);
        let z: Vec<f64> = (0..2 * n * d).map(|_| rng::normal(&mut r)).collect();
        let split_z = |x: &[f64]| {
            let e: Vec<VideoEmbedding> = x.chunks(d).map(|c| VideoEmbedding(c.to_vec())).collect();
            (e[..n].to_vec(), e[n..].to_vec())
        };
        let (za, zb) = split_z(&z);
        let g = losses::ntxent_loss_grad(&za, &zb, tau, cfg.ntxent_mode).unwrap();
        let num = central_diff(&z, &|x| {
            let (a, b) = split_z(x);
            losses::ntxent_loss(&a, &b, tau, cfg.ntxent_mode).unwrap()
        });
        worst[2] = worst[2].max(rel_err(&[g.da.concat(), g.db.concat()].concat(), &num));

        let (p, p_hat, delta) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.05..0.5));
        let num = central_diff(&[p_hat], &|x| losses::huber_loss(p, x[0], delta));
        worst[3] = worst[3].max(rel_err(&[losses::huber_grad(p, p_hat, delta)], &num));
    }
    ensure(
        worst.iter().all(|w| *w < 1e-4),
        format!("max relative error cls {:.1e}, reg {:.1e}, nt-xent {:.1e}, huber {:.1e} (tol 1e-4)", worst[0], worst[1], worst[2], worst[3]),
    )
}

// ---------------------------------------------------------------------------
// 2. NT-Xent against a literal double loop

fn ntxent_literal(za: &[Vec<f64>], zb: &[Vec<f64>], tau: f64) -> f64 {
    let n = za.len();
    let unit = |v: &Vec<f64>| {
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / r).collect::<Vec<f64>>()
    };
    let sim = |a: &Vec<f64>, b: &Vec<f64>| unit(a).iter().zip(unit(b)).map(|(x, y)| x * y).sum::<f64>();
    let all: Vec<&Vec<f64>> = za.iter().chain(zb).collect();
    let mut total = 0.0;
    for m in 0..n {
        let num = (sim(&za[m], &zb[m]) / tau).exp();
        let mut den = 0.0;
        for (k, zk) in all.iter().enumerate() {
            if k != m {
                den += (sim(&za[m], zk) / tau).exp();
            }
        }
        total += -(num / den).ln();
    }
    total / n as f64
}

fn criterion_2() -> Outcome {
    let mut r = rng::rng(202);
    let mode = LossConfig::default().ntxent_mode;
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = 1 + case % 8;
        let d = r.random_range(2..=8usize);
        let tau = r.random_range(0.05..1.0);
        let za = random_seq(&mut r, n, d, 1.0);
        let zb = random_seq(&mut r, n, d, 1.0);
        let wrap = |z: &[Vec<f64>]| z.iter().map(|v| VideoEmbedding(v.clone())).collect::<Vec<_>>();
        let got = losses::ntxent_loss(&wrap(&za), &wrap(&zb), tau, mode).unwrap();
        worst = worst.max((got - ntxent_literal(&za, &zb, tau)).abs());
    }
    let single = losses::ntxent_loss(&[VideoEmbedding(vec![0.3, -1.0, 2.0])], &[VideoEmbedding(vec![1.0, 0.5, 0.2])], 0.07, mode).unwrap();
    ensure(worst < 1e-6 && single == 0.0, format!("max |impl - literal| {worst:.1e} (tol 1e-6) over n in 1..=8, mode {mode:?}; n=1 loss {single}"))
}

// ---------------------------------------------------------------------------
// 3. TCC hand values

/// Scalar re-derivation of the one-dimensional example, anchor 0.
fn tcc_scalar_oracle(u: [f64; 2], v: [f64; 2], lambda: f64) -> ([f64; 2], [f64; 2], f64, f64) {
    let soft = |x: [f64; 2]| {
        let m = x[0].max(x[1]);
        let (a, b) = ((x[0] - m).exp(), (x[1] - m).exp());
        [a / (a + b), b / (a + b)]
    };
    let alpha = soft([-(u[0] - v[0]).powi(2), -(u[0] - v[1]).powi(2)]);
    let nn = alpha[0] * v[0] + alpha[1] * v[1];
    let y = soft([-(nn - u[0]).powi(2), -(nn - u[1]).powi(2)]);
    let mu = y[1];
    let var = y[0] * mu * mu + y[1] * (1.0 - mu) * (1.0 - mu);
    let loss = (0.0 - mu).powi(2) / var + lambda * 0.5 * var.ln();
    (alpha, y, mu, loss)
}

fn criterion_3() -> Outcome {
    // frozen constants; the oracle must reproduce them before the
    // implementation is compared against them
    const ALPHA: [f64; 2] = [0.73106, 0.26894];
    const Y_HAT: [f64; 2] = [0.61351, 0.38649];
    const MU: f64 = 0.38649;
    const LOSS: f64 = 0.62924;
    let (oa, oy, omu, oloss) = tcc_scalar_oracle([0.0, 1.0], [0.0, 1.0], 1e-3);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-4;
    let oracle_ok = close(oa[0], ALPHA[0]) && close(oa[1], ALPHA[1]) && close(oy[0], Y_HAT[0]) && close(oy[1], Y_HAT[1]) && close(omu, MU) && close(oloss, LOSS);

    let s = seq(1, &[vec![0.0], vec![1.0]]);
    let a = losses::align_anchor(0, &s, &s).unwrap();
    let cfg = LossConfig { lambda_var: 1e-3, ..LossConfig::default() };
    // the loss sums both anchors, and anchor 1 mirrors anchor 0
    let total = losses::tcc_regression_loss(&s, &s, &cfg).unwrap();
    let impl_ok = close(a.alpha[0], ALPHA[0])
        && close(a.alpha[1], ALPHA[1])
        && close(a.cycle_dist[0], Y_HAT[0])
        && close(a.cycle_dist[1], Y_HAT[1])
        && close(a.mu, MU)
        && close(total / 2.0, LOSS);
    ensure(
        oracle_ok && impl_ok,
        format!(
            "alpha ({:.5}, {:.5}), y_hat ({:.5}, {:.5}), mu {:.5}, per-anchor loss {:.5}; oracle loss {oloss:.5}",
            a.alpha[0], a.alpha[1], a.cycle_dist[0], a.cycle_dist[1], a.mu, total / 2.0
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. cycle-consistency invariants

fn random_orthogonal(r: &mut rng::Rng, d: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng::normal(r)).collect();
        for b in &q {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            q.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    q
}

fn rotate(q: &[Vec<f64>], rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|x| q.iter().map(|qi| qi.iter().zip(x).map(|(a, b)| a * b).sum()).collect()).collect()
}

fn criterion_4() -> Outcome {
    let mut r = rng::rng(404);
    let cfg = LossConfig::default();
    let (mut simplex, mut mu_ok, mut orth) = (0.0f64, true, 0.0f64);
    for _ in 0..100 {
        let (t, d) = (r.random_range(2..=6usize), r.random_range(1..=8usize));
        let t2 = r.random_range(2..=6usize);
        let (ur, vr) = (random_seq(&mut r, t, d, 1.0), random_seq(&mut r, t2, d, 1.0));
        let (u, v) = (seq(d, &ur), seq(d, &vr));
        for i in 0..t {
            let a = losses::align_anchor(i, &u, &v).unwrap();
            simplex = simplex.max((a.alpha.iter().sum::<f64>() - 1.0).abs()).max((a.cycle_dist.iter().sum::<f64>() - 1.0).abs());
            mu_ok &= a.alpha.iter().chain(&a.cycle_dist).all(|x| *x >= 0.0) && (0.0..=(t - 1) as f64).contains(&a.mu);
        }
        let q = random_orthogonal(&mut r, d);
        let (qu, qv) = (seq(d, &rotate(&q, &ur)), seq(d, &rotate(&q, &vr)));
        orth = orth
            .max((losses::tcc_classification_loss(&u, &v).unwrap() - losses::tcc_classification_loss(&qu, &qv).unwrap()).abs())
            .max((losses::tcc_regression_loss(&u, &v, &cfg).unwrap() - losses::tcc_regression_loss(&qu, &qv, &cfg).unwrap()).abs())
            .max((losses::multiview_tcc_loss(&[u.clone(), v.clone()], &cfg).unwrap() - losses::multiview_tcc_loss(&[qu, qv], &cfg).unwrap()).abs());
    }
    // self vs shuffled alignment on well-separated frames
    let mut ordered = 0;
    let mut max_gap = 0.0f64;
    for _ in 0..100 {
        let (t, d) = (r.random_range(3..=6usize), r.random_range(2..=8usize));
        let rows = loop {
            let rows = random_seq(&mut r, t, d, 6.0);
            let sep = (0..t).all(|i| (0..i).all(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= 10.0));
            if sep {
                break rows;
            }
        };
        let mut shuffled = rows.clone();
        while shuffled == rows {
            for i in (1..t).rev() {
                shuffled.swap(i, r.random_range(0..=i));
            }
        }
        let own = losses::tcc_regression_loss(&seq(d, &rows), &seq(d, &rows), &cfg).unwrap();
        let other = losses::tcc_regression_loss(&seq(d, &rows), &seq(d, &shuffled), &cfg).unwrap();
        ordered += usize::from(own < other);
        max_gap = max_gap.max((own - other).abs());
    }
    let detail = format!(
        "simplex err {simplex:.1e} (tol 1e-6), mu in range {mu_ok}, orthogonal err {orth:.1e} (tol 1e-6), \
         self < shuffled in {ordered}/100 (max |self - shuffled| {max_gap:.1e}: the alignment loss ignores frame order of the partner)"
    );
    ensure(simplex < 1e-6 && mu_ok && orth < 1e-6 && ordered == 100, detail)
}

// ---------------------------------------------------------------------------
// 5. freeze contract, 6. memory decoupling

fn criterion_5(cfg: &RunConfig, videos: &[VideoSample]) -> Outcome {
    let refs: Vec<&VideoSample> = videos.iter().collect();
    let fs = SpatialEncoder::new(&cfg.spatial_arch, 5).unwrap();
    let before = pipeline::ModuleState::capture(fs.arch().descriptor(), &fs).payload_bytes();
    let mut ft = TemporalEncoder::new(&cfg.temporal_arch, 6).unwrap();
    let views = cfg.views();
    let mut cache = EmbeddingCache::for_encoder(&fs);
    let st = pipeline::StageConfig { seed: 7, ..cfg.temporal };
    pipeline::pretrain_temporal(&refs, &fs, &mut ft, &st, &views, &cfg.loss, &mut cache, None).unwrap();
    let after_temporal = pipeline::ModuleState::capture(fs.arch().descriptor(), &fs).payload_bytes();
    let train: Vec<Labeled> = videos.iter().filter_map(|v| v.label.map(|l| Labeled { video: v, target: l.p() })).collect();
    let mut fc = ClassifierHead::new(cfg.temporal_arch.width, cfg.head_hidden, 8);
    let st = pipeline::StageConfig { seed: 9, ..cfg.finetune };
    pipeline::finetune(&train, &fs, &mut ft, &mut fc, &st, &views, &cfg.loss, &mut cache, None).unwrap();
    let after_finetune = pipeline::ModuleState::capture(fs.arch().descriptor(), &fs).payload_bytes();

    let mut frozen_state = 0;
    for stage in [cfg.spatial, cfg.temporal, cfg.finetune] {
        let rep = pipeline::trainable_report(&stage, &fs, &ft, &fc);
        frozen_state += rep.modules.iter().filter(|m| !m.trainable).map(|m| m.optimizer_state).sum::<usize>();
    }
    ensure(
        before == after_temporal && before == after_finetune && frozen_state == 0,
        format!(
            "spatial payload {} bytes unchanged after temporal stage: {}, after fine-tune: {}; optimizer state on frozen modules: {frozen_state}",
            before.len(),
            before == after_temporal,
            before == after_finetune
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = RunConfig::default();
    let fs = SpatialEncoder::new(&cfg.spatial_arch, 1).unwrap();
    let ft = TemporalEncoder::new(&cfg.temporal_arch, 2).unwrap();
    let fc = ClassifierHead::new(cfg.temporal_arch.width, cfg.head_hidden, 3);
    let sp = pipeline::trainable_report(&cfg.spatial, &fs, &ft, &fc);
    let tp = pipeline::trainable_report(&cfg.temporal, &fs, &ft, &fc);
    say(&format!("{sp}\n{tp}"));
    ensure(
        3 * tp.trainable <= sp.trainable,
        format!(
            "method-scale preset: spatial stage trains {}, temporal stage {} ({:.3} of spatial, limit 1/3); end-to-end/stage ratio spatial {:.2}, temporal {:.2} \
             (the method reports about 7x GPU memory at batch 4; not asserted)",
            sp.trainable,
            tp.trainable,
            tp.trainable as f64 / sp.trainable as f64,
            sp.ratio,
            tp.ratio
        ),
    )
}

// ---------------------------------------------------------------------------
// 7-9. synthetic learning and ablations

struct Arms {
    two_stage: f64,
    spatial_only: f64,
    temporal_only: f64,
    none: f64,
    per_frame: f64,
    random_sampling: f64,
    n_videos: usize,
    n_labeled: usize,
    oracle: f64,
}

fn run_arms(cfg: &RunConfig, corpus: &io::Corpus, videos: &[VideoSample]) -> Arms {
    let mut memo = SpatialMemo::default();
    let mut arm = |name: &str, c: RunConfig| {
        let rep = run_crossval_with(&c, videos, &corpus.manifest, &corpus.manifest, None, &mut |_| {}, &mut memo).unwrap();
        let per_seed: Vec<String> = rep.repeats.iter().map(|r| format!("{:.3}", r.mean_auroc)).collect();
        say(&format!("    arm {name:<14} {}  per seed [{}]", rep.overall, per_seed.join(", ")));
        rep.overall.mean
    };
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = cfg.clone();
        f(&mut c);
        c
    };
    Arms {
        two_stage: arm("two-stage", with(&|c| c.eval.ablation = Ablation::TwoStage)),
        spatial_only: arm("spatial-only", with(&|c| c.eval.ablation = Ablation::SpatialOnly)),
        temporal_only: arm("temporal-only", with(&|c| c.eval.ablation = Ablation::TemporalOnly)),
        none: arm("none", with(&|c| c.eval.ablation = Ablation::None)),
        per_frame: arm("per-frame aug", with(&|c| c.augment.temporally_consistent = false)),
        random_sampling: arm("random sampling", with(&|c| c.sampling = Sampling::Random)),
        n_videos: corpus.manifest.records.len(),
        n_labeled: corpus.manifest.labeled().count(),
        oracle: synth::oracle_auroc_bound(&cfg.synth).unwrap(),
    }
}

fn criterion_7(a: &Arms) -> Outcome {
    ensure(
        a.n_videos >= 300 && a.n_labeled >= 120 && a.oracle >= 0.9 && a.two_stage >= 0.80 && a.two_stage - a.none >= 0.05,
        format!(
            "{} videos, {} labeled, oracle bound {:.3}; two-stage {:.3} (need >= 0.80), none {:.3} (gap {:.3}, need >= 0.05)",
            a.n_videos,
            a.n_labeled,
            a.oracle,
            a.two_stage,
            a.none,
            a.two_stage - a.none
        ),
    )
}

fn criterion_8(a: &Arms) -> Outcome {
    let best_single = a.spatial_only.max(a.temporal_only);
    ensure(
        a.two_stage + 0.01 >= best_single,
        format!("two-stage {:.3}, spatial-only {:.3}, temporal-only {:.3} (two-stage must be highest or within 0.01)", a.two_stage, a.spatial_only, a.temporal_only),
    )
}

fn criterion_9(a: &Arms) -> Outcome {
    ensure(
        a.two_stage >= a.per_frame && a.two_stage >= a.random_sampling,
        format!("consistent + uniform {:.3}, per-frame {:.3}, random sampling {:.3}", a.two_stage, a.per_frame, a.random_sampling),
    )
}

// ---------------------------------------------------------------------------
// 10. outlier filter

fn criterion_10(dir: &Path) -> Outcome {
    let mut cfg = desk_config();
    cfg.synth.n_videos = 100;
    cfg.synth.outlier_rate = 0.02;
    cfg.synth.outlier_kinds = vec![OutlierKind::Blank, OutlierKind::LowExposure, OutlierKind::Blur];
    io::generate_corpus(&cfg.synth, dir).unwrap();
    let corpus = io::load_manifest(dir).unwrap();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for r in &corpus.manifest.records {
        let video = corpus.load_video(&r.video_id).unwrap();
        let truth: BTreeSet<usize> = corpus.outliers(&r.video_id).unwrap().unwrap().into_iter().collect();
        let (_, removed) = filter_outliers(&video, &PreprocessConfig::default()).unwrap();
        let hit = removed.iter().filter(|i| truth.contains(i)).count();
        tp += hit;
        fp += removed.len() - hit;
        fn_ += truth.len() - hit;
    }
    let recall = tp as f64 / (tp + fn_) as f64;
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    ensure(
        tp + fn_ > 0 && recall >= 0.95 && precision >= 0.90,
        format!("{} injected outliers: recall {recall:.3} (need >= 0.95), precision {precision:.3} (need >= 0.90)", tp + fn_),
    )
}

// ---------------------------------------------------------------------------
// 11. AUROC oracle

fn criterion_11() -> Outcome {
    let mut r = rng::rng(1111);
    let mut worst = 0.0f64;
    let mut ties = 0;
    for _ in 0..100 {
        let n = r.random_range(2..50usize);
        let mut y: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        y[0] = 1;
        y[1] = 0;
        let s: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8u8)) / 7.0).collect();
        ties += usize::from(s.iter().map(|x| x.to_bits()).collect::<BTreeSet<_>>().len() < n);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        worst = worst.max((auroc(&y, &s).unwrap() - num / den).abs());
    }
    let hand = auroc(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.1]).unwrap();
    ensure(worst < 1e-12 && hand == 0.75, format!("max |auroc - pairwise| {worst:.1e} (tol 1e-12), {ties}/100 instances with ties; hand case {hand}"))
}

// ---------------------------------------------------------------------------
// 12. reproducibility

const TINY: &str = r#"
[synth]
n_videos = 24
frame_size = 32
length_min = 60
length_max = 80
label_fraction = 0.8

[preprocess]
resize_to = 16

[sampling]
view_pool = 2

[model]
spatial = "conv(input=16,channels=4-8,width=8)"
temporal = "transformer(width=8,layers=1,heads=2,mlp=16,max_len=32,pooling=mean)"
head_hidden = 4

[stage.spatial]
epochs = 2
learning_rate = 0.001

[stage.temporal]
epochs = 2
batch_size = 8

[stage.finetune]
epochs = 2

[eval]
folds = 2
repeats = 2
"#;

fn cli_session(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fs::write(dir.join("tiny.toml"), TINY).unwrap();
    let steps: &[&[&str]] = &[
        &["gen-data", "--out", "corpus"],
        &["preprocess", "--in", "corpus", "--out", "clean"],
        &["pretrain-spatial", "--data", "corpus"],
        &["pretrain-temporal", "--data", "corpus", "--out-ckpt", "t.ckpt"],
        &["finetune", "--data", "corpus", "--temporal-ckpt", "t.ckpt", "--holdout-fold", "1", "--out-ckpt", "f.ckpt"],
        &["evaluate", "--data", "corpus", "--ckpt", "f.ckpt", "--fold", "1"],
        &["crossval", "--data", "corpus"],
        &["crossval", "--data", "corpus", "--ablation", "temporal-only", "--aug", "per-frame", "--sampling", "random"],
        &["export-embeddings", "--data", "corpus", "--ckpt", "f.ckpt", "--level", "frame", "--out", "frames.tsv"],
        &["export-embeddings", "--data", "corpus", "--ckpt", "f.ckpt", "--level", "video", "--out", "videos.tsv"],
        &["report-trainable"],
    ];
    let mut stdout = Vec::new();
    for s in steps {
        let o = Command::new(env!("CARGO_BIN_EXE_stpt"))
            .current_dir(dir)
            .env("STPT_DETERMINISTIC", "1")
            .args(["--config", "tiny.toml"])
            .args(*s)
            .output()
            .unwrap();
        assert!(o.status.success(), "{s:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout.extend(o.stdout);
    }
    fs::write(dir.join("stdout.txt"), stdout).unwrap();
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn criterion_12(cfg: &RunConfig, videos: &[VideoSample]) -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cli_session(a.path());
    let second = cli_session(b.path());
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let ckpts = first.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "ckpt")).count();
    let same_tree = first.len() == second.len() && differing.is_empty();

    // save/load round trip of a trained model on desk-preset videos
    let refs: Vec<&VideoSample> = videos.iter().take(24).collect();
    let mut fs = SpatialEncoder::new(&cfg.spatial_arch, 1).unwrap();
    let st = pipeline::StageConfig { epochs: 1, seed: 2, ..cfg.spatial };
    pipeline::pretrain_spatial(&refs, &mut fs, &st, &cfg.views(), &cfg.loss, None).unwrap();
    let ft = TemporalEncoder::new(&cfg.temporal_arch, 3).unwrap();
    let fc = ClassifierHead::new(cfg.temporal_arch.width, cfg.head_hidden, 4);
    let views = cfg.views();
    let probe = |fs: &SpatialEncoder, ft: &TemporalEncoder, fc: &ClassifierHead| -> Vec<u64> {
        let mut cache = EmbeddingCache::disabled();
        refs.iter().map(|v| pipeline::predict(fs, ft, fc, &views, &mut cache, v).unwrap().to_bits()).collect()
    };
    let ck = StageCheckpoint::new(StageKind::Finetune, 1, &cfg.fingerprint(), 0).with_spatial(&fs).with_temporal(&ft).with_head(&fc);
    let path = a.path().join("roundtrip.ckpt");
    io::save_checkpoint(&path, &ck).unwrap();
    let back = io::load_checkpoint(&path).unwrap();
    let restored = (
        back.spatial_encoder(Some(&cfg.spatial_arch)).unwrap(),
        back.temporal_encoder(Some(&cfg.temporal_arch)).unwrap(),
        back.head().unwrap(),
    );
    let round_trip = probe(&fs, &ft, &fc) == probe(&restored.0, &restored.1, &restored.2) && back == ck;
    ensure(
        same_tree && ckpts == 3 && round_trip,
        format!(
            "two deterministic CLI sessions: {} files, {} checkpoints, differing {:?}; checkpoint round trip bit-identical on {} probes: {round_trip}",
            first.len(),
            ckpts,
            differing,
            refs.len()
        ),
    )
}

// ---------------------------------------------------------------------------

/// Criteria whose literal statement cannot hold; their line still prints
/// FAIL with the measured values, but they do not fail the run.
const UNATTAINABLE: &[(u8, &str)] = &[(
    4,
    "cycle-back alignment is invariant to permuting the partner sequence, so self and shuffled alignment losses agree to rounding",
)];

#[test]
fn acceptance() {
    say("");
    let mut failed: Vec<u8> = Vec::new();
    let mut record = |n: u8, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let (tag, detail) = match &out {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        say(&format!("criterion {n:>2} {tag}  {title}: {detail}"));
        if out.is_err() {
            failed.push(n);
        }
    };

    record(1, "loss gradients match central differences", &mut criterion_1);
    record(2, "NT-Xent equals the literal double loop", &mut criterion_2);
    record(3, "TCC one-dimensional hand values", &mut criterion_3);
    record(4, "cycle-consistency invariants", &mut criterion_4);

    let scratch = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let corpus_dir = scratch.path().join("corpus");
    io::generate_corpus(&cfg.synth, &corpus_dir).unwrap();
    let corpus = io::load_manifest(&corpus_dir).unwrap();
    let videos: Vec<VideoSample> = corpus
        .manifest
        .records
        .iter()
        .map(|r| preprocess_video(&corpus.load_video(&r.video_id).unwrap(), &cfg.preprocess, false).unwrap().0)
        .collect();

    record(5, "spatial encoder frozen after pre-training", &mut || criterion_5(&cfg, &videos));
    record(6, "temporal stage trains at most a third of the spatial stage", &mut criterion_6);

    let arms = catch_unwind(AssertUnwindSafe(|| run_arms(&cfg, &corpus, &videos)));
    let mut with_arms = |n: u8, title: &str, f: fn(&Arms) -> Outcome| match &arms {
        Ok(a) => record(n, title, &mut || f(a)),
        Err(_) => record(n, title, &mut || Err("ablation runs panicked".into())),
    };
    with_arms(7, "two-stage learns the synthetic viability signal", criterion_7);
    with_arms(8, "two-stage ranks at the top of the stage ablation", criterion_8);
    with_arms(9, "consistent augmentation and uniform sampling rank first", criterion_9);

    record(10, "outlier filter recall and precision", &mut || criterion_10(&scratch.path().join("outliers")));
    record(11, "AUROC matches pairwise counting", &mut criterion_11);
    record(12, "deterministic reruns and checkpoint round trip", &mut || criterion_12(&cfg, &videos));

    for (n, why) in UNATTAINABLE {
        if failed.contains(n) {
            say(&format!("note: criterion {n} is not attainable as stated: {why}"));
        }
    }
    let blocking: Vec<u8> = failed.iter().copied().filter(|n| !UNATTAINABLE.iter().any(|(u, _)| u == n)).collect();
    assert!(blocking.is_empty(), "failed criteria: {blocking:?}");
}
