//! Alignment, contrastive and regression losses with analytic gradients.
//!
//! Everything here runs in `f64`. Each loss has a value-only entry point and
//! a `*_grad` twin returning gradients with respect to its inputs.
//!
//! Frame indices are 0-based. Shifting all indices by a constant leaves
//! `i - μ` and `σ²` unchanged, so the alignment losses do not depend on the
//! convention.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoders::{EmbeddingSequence, VideoEmbedding};
use crate::error::{Error, Result};
use crate::math::{exp, ln, sqrt};

/// Which anchors the NT-Xent average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NtXentMode {
    /// Anchors are the first view only, averaged over `n`; denominator over
    /// the `2n - 1` non-self embeddings.
    Literal,
    /// All `2n` embeddings act as anchors.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the `log σ` term in the regression alignment loss.
    pub lambda_var: f64,
    /// Lower bound applied to `σ²` before division and log.
    pub sigma2_floor: f64,
    /// Contrastive temperature.
    pub tau: f64,
    pub huber_delta: f64,
    /// Divide alignment losses by the anchor count instead of summing.
    pub normalize_by_length: bool,
    pub ntxent_mode: NtXentMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_var: 1e-3,
            sigma2_floor: 1e-6,
            tau: 0.07,
            huber_delta: 0.2,
            normalize_by_length: false,
            ntxent_mode: NtXentMode::Literal,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.lambda_var) && ok(self.sigma2_floor) && ok(self.tau) && ok(self.huber_delta)) {
            return Err(Error::InvalidConfig("loss parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Per-anchor soft alignment record.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAlignment {
    /// Similarity weights of the anchor over the other sequence.
    pub alpha: Vec<f64>,
    /// Soft nearest neighbour `Σ αⱼ vⱼ`.
    pub soft_nn: Vec<f64>,
    /// Cycle-back distribution over the anchor's own sequence.
    pub cycle_dist: Vec<f64>,
    /// Expected cycle-back index.
    pub mu: f64,
    /// Cycle-back variance, before flooring.
    pub sigma2: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `softmax(-d)` with the minimum subtracted first.
fn softmax_neg(d: &[f64]) -> Vec<f64> {
    let m = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut e: Vec<f64> = d.iter().map(|x| exp(m - x)).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|x| *x /= s);
    e
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Similarity weights of `anchor` over `v` and the resulting soft nearest
/// neighbour. The cycle-back fields are left empty.
pub fn soft_align(anchor: &[f64], v: &EmbeddingSequence) -> Result<SoftAlignment> {
    if anchor.len() != v.width() {
        return Err(Error::ShapeMismatch(format!("anchor width {} vs sequence width {}", anchor.len(), v.width())));
    }
    if v.is_empty() {
        return Err(Error::TooShortVideo { len: 0, min: 1 });
    }
    check_finite(anchor, "alignment anchor")?;
    let d: Vec<f64> = (0..v.len()).map(|j| sq_dist(anchor, v.row(j))).collect();
    let alpha = softmax_neg(&d);
    let mut soft_nn = vec![0.0; v.width()];
    for (j, a) in alpha.iter().enumerate() {
        soft_nn.iter_mut().zip(v.row(j)).for_each(|(s, x)| *s += a * x);
    }
    Ok(SoftAlignment { alpha, soft_nn, cycle_dist: Vec::new(), mu: 0.0, sigma2: 0.0 })
}

/// Distribution over the frames of `u` obtained by comparing the soft
/// nearest neighbour back against each of them.
pub fn cycle_back(soft_nn: &[f64], u: &EmbeddingSequence) -> Result<Vec<f64>> {
    if soft_nn.len() != u.width() {
        return Err(Error::ShapeMismatch(format!("soft neighbour width {} vs sequence width {}", soft_nn.len(), u.width())));
    }
    check_finite(soft_nn, "soft nearest neighbour")?;
    let e: Vec<f64> = (0..u.len()).map(|k| sq_dist(soft_nn, u.row(k))).collect();
    Ok(softmax_neg(&e))
}

/// Full alignment record for anchor `i` of `u` against `v`.
pub fn align_anchor(i: usize, u: &EmbeddingSequence, v: &EmbeddingSequence) -> Result<SoftAlignment> {
    let mut sa = soft_align(u.row(i), v)?;
    sa.cycle_dist = cycle_back(&sa.soft_nn, u)?;
    sa.mu = sa.cycle_dist.iter().enumerate().map(|(k, y)| k as f64 * y).sum();
    sa.sigma2 = sa.cycle_dist.iter().enumerate().map(|(k, y)| y * (k as f64 - sa.mu) * (k as f64 - sa.mu)).sum();
    Ok(sa)
}

fn check_pair(u: &EmbeddingSequence, v: &EmbeddingSequence) -> Result<()> {
    if u.width() != v.width() {
        return Err(Error::ShapeMismatch(format!("sequence widths {} and {}", u.width(), v.width())));
    }
    for s in [u, v] {
        if s.len() < 2 {
            return Err(Error::TooShortVideo { len: s.len(), min: 2 });
        }
    }
    Ok(())
}

/// Loss value and gradients for a pair of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub value: f64,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Backpropagate `dL/de_k` (cycle-back squared distances) of anchor `i`
/// through the soft nearest neighbour into `du`, `dv`.
fn anchor_backward(
    i: usize,
    u: &EmbeddingSequence,
    v: &EmbeddingSequence,
    sa: &SoftAlignment,
    de: &[f64],
    du: &mut [f64],
    dv: &mut [f64],
) {
    let w = u.width();
    let mut dsoft = vec![0.0; w];
    for (k, &g) in de.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let uk = u.row(k);
        for c in 0..w {
            let diff = sa.soft_nn[c] - uk[c];
            dsoft[c] += 2.0 * g * diff;
            du[k * w + c] -= 2.0 * g * diff;
        }
    }
    let dalpha: Vec<f64> = (0..v.len()).map(|j| v.row(j).iter().zip(&dsoft).map(|(a, b)| a * b).sum()).collect();
    for (j, a) in sa.alpha.iter().enumerate() {
        dv[j * w..(j + 1) * w].iter_mut().zip(&dsoft).for_each(|(g, s)| *g += a * s);
    }
    let s: f64 = sa.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
    let ui = u.row(i);
    for j in 0..v.len() {
        let dd = -sa.alpha[j] * (dalpha[j] - s);
        if dd == 0.0 {
            continue;
        }
        let vj = v.row(j);
        for c in 0..w {
            let diff = ui[c] - vj[c];
            du[i * w + c] += 2.0 * dd * diff;
            dv[j * w + c] -= 2.0 * dd * diff;
        }
    }
}

fn anchor_scale(u: &EmbeddingSequence, normalize: bool) -> f64 {
    if normalize {
        1.0 / u.len() as f64
    } else {
        1.0
    }
}

fn cls_impl(u: &EmbeddingSequence, v: &EmbeddingSequence, normalize: bool, grad: bool) -> Result<PairGrad> {
    check_pair(u, v)?;
    let scale = anchor_scale(u, normalize);
    let mut out = PairGrad { value: 0.0, du: vec![0.0; u.data().len()], dv: vec![0.0; v.data().len()] };
    for i in 0..u.len() {
        let sa = align_anchor(i, u, v)?;
        let e: Vec<f64> = (0..u.len()).map(|k| sq_dist(&sa.soft_nn, u.row(k))).collect();
        let m = e.iter().copied().fold(f64::INFINITY, f64::min);
        let lse = ln(e.iter().map(|x| exp(m - x)).sum::<f64>());
        out.value += scale * (e[i] - m + lse);
        if grad {
            // d(-log ŷᵢ)/d logitₖ = ŷₖ - [k = i] with logit = -e
            let de: Vec<f64> = sa.cycle_dist.iter().enumerate().map(|(k, y)| scale * (if k == i { 1.0 } else { 0.0 } - y)).collect();
            anchor_backward(i, u, v, &sa, &de, &mut out.du, &mut out.dv);
        }
    }
    check_finite(&[out.value], "classification alignment loss")?;
    Ok(out)
}

fn reg_impl(u: &EmbeddingSequence, v: &EmbeddingSequence, cfg: &LossConfig, grad: bool) -> Result<PairGrad> {
    check_pair(u, v)?;
    let scale = anchor_scale(u, cfg.normalize_by_length);
    let mut out = PairGrad { value: 0.0, du: vec![0.0; u.data().len()], dv: vec![0.0; v.data().len()] };
    for i in 0..u.len() {
        let sa = align_anchor(i, u, v)?;
        let floored = sa.sigma2 <= cfg.sigma2_floor;
        let s2 = if floored { cfg.sigma2_floor } else { sa.sigma2 };
        let dev = i as f64 - sa.mu;
        out.value += scale * (dev * dev / s2 + cfg.lambda_var * 0.5 * ln(s2));
        if grad {
            let dmu = -2.0 * dev / s2;
            let ds2 = if floored { 0.0 } else { -dev * dev / (s2 * s2) + cfg.lambda_var / (2.0 * s2) };
            let gy: Vec<f64> =
                (0..u.len()).map(|k| dmu * k as f64 + ds2 * (k as f64 - sa.mu) * (k as f64 - sa.mu)).collect();
            let mean: f64 = gy.iter().zip(&sa.cycle_dist).map(|(g, y)| g * y).sum();
            let de: Vec<f64> = sa.cycle_dist.iter().zip(&gy).map(|(y, g)| -scale * y * (g - mean)).collect();
            anchor_backward(i, u, v, &sa, &de, &mut out.du, &mut out.dv);
        }
    }
    check_finite(&[out.value], "regression alignment loss")?;
    Ok(out)
}

/// Cycle-back cross-entropy summed over the anchors of `u`.
pub fn tcc_classification_loss(u: &EmbeddingSequence, v: &EmbeddingSequence) -> Result<f64> {
    cls_impl(u, v, false, false).map(|g| g.value)
}

pub fn tcc_classification_loss_grad(u: &EmbeddingSequence, v: &EmbeddingSequence) -> Result<PairGrad> {
    cls_impl(u, v, false, true)
}

/// Gaussian-prior cycle-back loss `Σᵢ (i-μ)²/σ² + λ log σ` over anchors of `u`.
pub fn tcc_regression_loss(u: &EmbeddingSequence, v: &EmbeddingSequence, cfg: &LossConfig) -> Result<f64> {
    reg_impl(u, v, cfg, false).map(|g| g.value)
}

pub fn tcc_regression_loss_grad(u: &EmbeddingSequence, v: &EmbeddingSequence, cfg: &LossConfig) -> Result<PairGrad> {
    reg_impl(u, v, cfg, true)
}

/// Loss and per-view gradients for a multi-view objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGrad {
    pub value: f64,
    pub grads: Vec<Vec<f64>>,
}

fn multiview_impl(views: &[EmbeddingSequence], cfg: &LossConfig, grad: bool) -> Result<MultiGrad> {
    if views.len() < 2 {
        return Err(Error::TooFewViews(views.len()));
    }
    let width = views[0].width();
    if views.iter().any(|v| v.width() != width) {
        return Err(Error::ShapeMismatch("views differ in width".into()));
    }
    let pairs = (views.len() * (views.len() - 1)) as f64;
    let mut out = MultiGrad { value: 0.0, grads: views.iter().map(|v| vec![0.0; v.data().len()]).collect() };
    for a in 0..views.len() {
        for b in 0..views.len() {
            if a == b {
                continue;
            }
            let g = reg_impl(&views[a], &views[b], cfg, grad)?;
            out.value += g.value / pairs;
            if grad {
                out.grads[a].iter_mut().zip(&g.du).for_each(|(x, d)| *x += d / pairs);
                out.grads[b].iter_mut().zip(&g.dv).for_each(|(x, d)| *x += d / pairs);
            }
        }
    }
    Ok(out)
}

/// Mean regression alignment loss over all ordered pairs of distinct views.
pub fn multiview_tcc_loss(views: &[EmbeddingSequence], cfg: &LossConfig) -> Result<f64> {
    multiview_impl(views, cfg, false).map(|g| g.value)
}

pub fn multiview_tcc_loss_grad(views: &[EmbeddingSequence], cfg: &LossConfig) -> Result<MultiGrad> {
    multiview_impl(views, cfg, true)
}

/// NT-Xent value and gradients with respect to the raw (unnormalized)
/// embeddings of both views.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGrad {
    pub value: f64,
    pub da: Vec<Vec<f64>>,
    pub db: Vec<Vec<f64>>,
}

fn normalize(z: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_finite(z, "video embedding")?;
    let n = sqrt(z.iter().map(|x| x * x).sum());
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((z.iter().map(|x| x / n).collect(), n))
}

fn ntxent_impl(za: &[VideoEmbedding], zb: &[VideoEmbedding], tau: f64, mode: NtXentMode, grad: bool) -> Result<ContrastiveGrad> {
    let n = za.len();
    if n == 0 || zb.len() != n {
        return Err(Error::LengthMismatch(format!("{} vs {} video embeddings", za.len(), zb.len())));
    }
    let width = za[0].width();
    if za.iter().chain(zb).any(|z| z.width() != width) {
        return Err(Error::ShapeMismatch("video embeddings differ in width".into()));
    }
    let mut unit = Vec::with_capacity(2 * n);
    let mut norms = Vec::with_capacity(2 * n);
    for z in za.iter().chain(zb) {
        let (u, r) = normalize(&z.0)?;
        unit.push(u);
        norms.push(r);
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let anchors = match mode {
        NtXentMode::Literal => n,
        NtXentMode::Symmetric => 2 * n,
    };
    let mut value = 0.0;
    let mut dunit = vec![vec![0.0; width]; 2 * n];
    for a in 0..anchors {
        let pos = (a + n) % (2 * n);
        let logits: Vec<(usize, f64)> = (0..2 * n).filter(|&k| k != a).map(|k| (k, dot(&unit[a], &unit[k]) / tau)).collect();
        let m = logits.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| exp(l.1 - m)).sum();
        let s_pos = dot(&unit[a], &unit[pos]) / tau;
        value += (m + ln(z) - s_pos) / anchors as f64;
        if grad {
            for &(k, s) in &logits {
                let p = exp(s - m) / z;
                let c = (p - if k == pos { 1.0 } else { 0.0 }) / (tau * anchors as f64);
                for j in 0..width {
                    dunit[a][j] += c * unit[k][j];
                    dunit[k][j] += c * unit[a][j];
                }
            }
        }
    }
    check_finite(&[value], "contrastive loss")?;
    let mut draw = Vec::with_capacity(2 * n);
    for ((u, du), r) in unit.iter().zip(&dunit).zip(&norms) {
        let proj = dot(u, du);
        draw.push(u.iter().zip(du).map(|(x, g)| (g - x * proj) / r).collect::<Vec<f64>>());
    }
    let db = draw.split_off(n);
    Ok(ContrastiveGrad { value, da: draw, db })
}

/// Temperature-scaled cross-entropy between paired video embeddings, with
/// cosine similarity over ℓ2-normalized vectors.
pub fn ntxent_loss(za: &[VideoEmbedding], zb: &[VideoEmbedding], tau: f64, mode: NtXentMode) -> Result<f64> {
    ntxent_impl(za, zb, tau, mode, false).map(|g| g.value)
}

pub fn ntxent_loss_grad(za: &[VideoEmbedding], zb: &[VideoEmbedding], tau: f64, mode: NtXentMode) -> Result<ContrastiveGrad> {
    ntxent_impl(za, zb, tau, mode, true)
}

/// Quadratic within `delta` of the target, linear outside.
pub fn huber_loss(p: f64, p_hat: f64, delta: f64) -> f64 {
    let r = (p - p_hat).abs();
    if r <= delta {
        0.5 * r * r
    } else {
        delta * (r - 0.5 * delta)
    }
}

/// d huber / d p_hat.
pub fn huber_grad(p: f64, p_hat: f64, delta: f64) -> f64 {
    let r = p_hat - p;
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}
