//! Spatial encoder (frame → embedding), temporal encoder (embedding
//! sequence → video embedding) and the viability head.

mod head;
mod spatial;
mod temporal;

pub use head::{ClassifierHead, HeadForward};
pub use spatial::{ConvNet, SpatialArch, SpatialEncoder, SpatialForward, Vit};
pub use temporal::{Pooling, TemporalArch, TemporalEncoder, TemporalForward};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Per-frame embeddings of one video view, with a validity mask so padded
/// sequences can share a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    width: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl EmbeddingSequence {
    /// All positions valid. Fails on non-finite entries.
    pub fn new(width: usize, data: Vec<f64>) -> Result<Self> {
        let len = if width == 0 { 0 } else { data.len() / width };
        Self::with_mask(width, data, vec![true; len])
    }

    pub fn with_mask(width: usize, data: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || data.len() != width * mask.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form {} rows of width {width}",
                data.len(),
                mask.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding sequence".into()));
        }
        Ok(EmbeddingSequence { width, data, mask })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(width, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Append masked zero rows up to `len` positions.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        if len > self.len() {
            out.data.resize(len * self.width, 0.0);
            out.mask.resize(len, false);
        }
        out
    }

    /// Apply `f` to every row (used for orthogonal-transform checks).
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..self.len()).map(|i| f(self.row(i))).collect();
        let width = rows.first().map_or(self.width, Vec::len);
        Self::with_mask(width, rows.concat(), self.mask.clone())
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

/// One vector summarizing a whole video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEmbedding(pub Vec<f64>);

impl VideoEmbedding {
    pub fn width(&self) -> usize {
        self.0.len()
    }
}

/// Sinusoidal position table, `length × width`, row-major.
pub fn positional_encoding(length: usize, width: usize) -> Result<Vec<f64>> {
    if width % 2 != 0 {
        return Err(Error::OddWidth(width));
    }
    let mut out = vec![0.0; length * width];
    for pos in 0..length {
        for j in 0..width / 2 {
            let freq = math::pow(10000.0, (2 * j) as f64 / width as f64);
            let angle = pos as f64 / freq;
            out[pos * width + 2 * j] = math::sin(angle);
            out[pos * width + 2 * j + 1] = math::cos(angle);
        }
    }
    Ok(out)
}

/// Freeze switch shared by all three model parts.
pub trait Trainable {
    fn set_trainable(&mut self, trainable: bool);
    fn is_trainable(&self) -> bool;
}

/// Frames of a preprocessed video as one NHWC batch (`C = 1`).
pub(crate) fn frames_to_batch(video: &crate::data::VideoSample) -> crate::nn::Image {
    let (h, w) = video.frame_shape();
    let mut img = crate::nn::Image::zeros(video.len(), h, w, 1);
    for (t, f) in video.frames.iter().enumerate() {
        // per-frame standardization: removes global brightness and contrast
        let n = f.pixels.len() as f32;
        let mean = f.pixels.iter().sum::<f32>() / n;
        let var = f.pixels.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv = 1.0 / libm::sqrtf(var + 1e-4);
        for (o, v) in img.data[t * h * w..(t + 1) * h * w].iter_mut().zip(&f.pixels) {
            *o = (v - mean) * inv;
        }
    }
    img
}
