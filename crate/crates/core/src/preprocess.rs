//! Outlier-frame removal, clipping, temporal subsampling and resizing.
//!
//! The full pipeline order is filter → clip → subsample → resize; see
//! [`preprocess_video`].

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;

use crate::data::{Frame, VideoSample};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub resize_to: usize,
    pub clip_max_frames: usize,
    pub subsample_stride: usize,
    /// Frames scoring below this fraction of the video median are dropped.
    pub gradient_low_fraction: f64,
    /// Frames scoring above this multiple of the video median are dropped.
    pub gradient_high_multiplier: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            resize_to: 224,
            clip_max_frames: 360,
            subsample_stride: 4,
            gradient_low_fraction: 0.25,
            gradient_high_multiplier: 6.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(m));
        if self.subsample_stride == 0 {
            return bad("preprocess.subsample_stride must be >= 1".into());
        }
        if self.clip_max_frames < self.subsample_stride {
            return bad(format!(
                "preprocess.clip_max_frames ({}) must be >= subsample_stride ({})",
                self.clip_max_frames, self.subsample_stride
            ));
        }
        if self.resize_to == 0 {
            return bad("preprocess.resize_to must be positive".into());
        }
        if !(self.gradient_low_fraction > 0.0 && self.gradient_low_fraction < 1.0) {
            return bad("preprocess.gradient_low_fraction must be in (0, 1)".into());
        }
        if !(self.gradient_high_multiplier > 1.0) {
            return bad("preprocess.gradient_high_multiplier must be > 1".into());
        }
        Ok(())
    }
}

/// Mean absolute forward difference along x plus the same along y.
///
/// A unit vertical step in an `H x W` frame scores `1 / (W - 1)`.
pub fn frame_gradient_score(frame: &Frame) -> f64 {
    let (h, w) = (frame.height, frame.width);
    let px = &frame.pixels;
    let mut gx = 0.0f64;
    let mut gy = 0.0f64;
    for y in 0..h {
        let row = &px[y * w..(y + 1) * w];
        for x in 0..w - 1 {
            gx += (row[x + 1] - row[x]).abs() as f64;
        }
        if y + 1 < h {
            let next = &px[(y + 1) * w..(y + 2) * w];
            for x in 0..w {
                gy += (next[x] - row[x]).abs() as f64;
            }
        }
    }
    let mx = if w > 1 { gx / (h * (w - 1)) as f64 } else { 0.0 };
    let my = if h > 1 { gy / ((h - 1) * w) as f64 } else { 0.0 };
    mx + my
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Drop frames whose gradient score leaves the band
/// `[low * median, high * median]`. At least four frames always survive;
/// if the band would keep fewer, the four highest-scoring frames are kept.
/// Removed positions are returned in ascending order.
pub fn filter_outliers(video: &VideoSample, cfg: &PreprocessConfig) -> Result<(VideoSample, Vec<usize>)> {
    const MIN_KEEP: usize = 4;
    if video.len() < MIN_KEEP {
        return Err(Error::TooShortVideo { len: video.len(), min: MIN_KEEP });
    }
    let scores: Vec<f64> = video.frames.iter().map(frame_gradient_score).collect();
    let med = median(&scores);
    let (lo, hi) = (cfg.gradient_low_fraction * med, cfg.gradient_high_multiplier * med);
    let mut keep: Vec<bool> = scores.iter().map(|&s| s >= lo && s <= hi).collect();
    if keep.iter().filter(|&&k| k).count() < MIN_KEEP {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        keep = alloc::vec![false; scores.len()];
        order[..MIN_KEEP].iter().for_each(|&i| keep[i] = true);
    }
    let removed = (0..keep.len()).filter(|&i| !keep[i]).collect();
    let frames = video.frames.iter().zip(&keep).filter(|(_, &k)| k).map(|(f, _)| f.clone()).collect();
    Ok((video.with_frames(frames), removed))
}

/// Keep frames 0, stride, 2*stride, ...
///
/// # Panics
/// If `stride` is zero.
pub fn uniform_subsample(video: &VideoSample, stride: usize) -> VideoSample {
    assert!(stride >= 1, "stride must be >= 1");
    video.with_frames(video.frames.iter().step_by(stride).cloned().collect())
}

/// Frame positions a uniform subsample of a `len`-frame video keeps.
pub fn uniform_indices(len: usize, stride: usize) -> Vec<usize> {
    (0..len).step_by(stride.max(1)).collect()
}

/// A sorted random subset of `count` frame positions (all of them when the
/// video is shorter).
pub fn random_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    let mut idx = index::sample(&mut rng::rng(seed), len, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Random-sampling counterpart of [`uniform_subsample`]: the same number of
/// frames, `ceil(T / stride)`, at sorted random positions.
pub fn random_subsample(video: &VideoSample, stride: usize, seed: u64) -> VideoSample {
    let count = video.len().div_ceil(stride.max(1));
    select_frames(video, &random_indices(video.len(), count, seed))
}

pub fn select_frames(video: &VideoSample, indices: &[usize]) -> VideoSample {
    video.with_frames(indices.iter().map(|&i| video.frames[i].clone()).collect())
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_frame(frame: &Frame, size: usize) -> Frame {
    if frame.height == size && frame.width == size {
        return frame.clone();
    }
    let (h, w) = (frame.height, frame.width);
    let sy = h as f32 / size as f32;
    let sx = w as f32 / size as f32;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = fy as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f32;
        for x in 0..size {
            let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = fx as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f32;
            let p = |yy: usize, xx: usize| frame.pixels[yy * w + xx];
            let top = p(y0, x0) * (1.0 - tx) + p(y0, x1) * tx;
            let bottom = p(y1, x0) * (1.0 - tx) + p(y1, x1) * tx;
            out.push((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0));
        }
    }
    Frame { height: size, width: size, pixels: out, time_index: frame.time_index }
}

/// Truncate to the first `clip_max_frames` frames, then resize each frame.
pub fn clip_and_resize(video: &VideoSample, cfg: &PreprocessConfig) -> VideoSample {
    resize(&clip(video, cfg.clip_max_frames), cfg.resize_to)
}

pub fn clip(video: &VideoSample, max_frames: usize) -> VideoSample {
    video.with_frames(video.frames.iter().take(max_frames).cloned().collect())
}

pub fn resize(video: &VideoSample, size: usize) -> VideoSample {
    video.with_frames(video.frames.iter().map(|f| resize_frame(f, size)).collect())
}

/// Filter, clip, optionally subsample uniformly, resize. Returns the
/// prepared video and the positions removed by the outlier filter.
///
/// With `subsample = false` the full clipped sequence is kept so a caller can
/// draw its own frame subsets (random-sampling ablation).
pub fn preprocess_video(video: &VideoSample, cfg: &PreprocessConfig, subsample: bool) -> Result<(VideoSample, Vec<usize>)> {
    cfg.validate()?;
    let (filtered, removed) = filter_outliers(video, cfg)?;
    let mut v = clip(&filtered, cfg.clip_max_frames);
    if subsample {
        v = uniform_subsample(&v, cfg.subsample_stride);
    }
    Ok((resize(&v, cfg.resize_to), removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn video(frames: Vec<Frame>) -> VideoSample {
        VideoSample { video_id: "v".to_string(), treatment_id: "t".to_string(), frames, transferred: false, label: None }
    }

    fn textured(h: usize, w: usize, t: u32) -> Frame {
        let px = (0..h * w).map(|i| ((i * 7919 % 13) as f32) / 13.0).collect();
        Frame::new(h, w, px, t).unwrap()
    }

    fn counted(n: usize) -> VideoSample {
        video((0..n).map(|t| Frame::filled(2, 2, 0.0, t as u32)).collect())
    }

    #[test]
    fn gradient_score_hand_values() {
        assert_eq!(frame_gradient_score(&Frame::filled(4, 4, 0.3, 0)), 0.0);
        // unit step between columns 1 and 2: 4 rows x 1 jump over 4 * 3 forward differences
        let step: Vec<f32> = (0..16).map(|i| if i % 4 >= 2 { 1.0 } else { 0.0 }).collect();
        let f = Frame::new(4, 4, step, 0).unwrap();
        assert!((frame_gradient_score(&f) - 1.0 / 3.0).abs() < 1e-12);
        let t = textured(5, 7, 0);
        let mirrored: Vec<f32> = (0..35).map(|i| t.pixels[(i / 7) * 7 + (6 - i % 7)]).collect();
        let m = Frame::new(5, 7, mirrored, 0).unwrap();
        assert!((frame_gradient_score(&t) - frame_gradient_score(&m)).abs() < 1e-12);
    }

    #[test]
    fn filter_examples() {
        let clean = video((0..10).map(|t| textured(8, 8, t)).collect());
        let (out, removed) = filter_outliers(&clean, &PreprocessConfig::default()).unwrap();
        assert!(removed.is_empty());
        assert_eq!(out.len(), 10);

        let mut frames: Vec<Frame> = (0..11).map(|t| textured(8, 8, t)).collect();
        frames[6] = Frame::filled(8, 8, 0.5, 6);
        let (out, removed) = filter_outliers(&video(frames), &PreprocessConfig::default()).unwrap();
        assert_eq!(removed, vec![6]);
        assert_eq!(out.len(), 10);
        assert!(matches!(
            filter_outliers(&counted(3), &PreprocessConfig::default()),
            Err(Error::TooShortVideo { len: 3, min: 4 })
        ));
    }

    #[test]
    fn filter_keeps_four() {
        // mostly blank video: median is 0, nothing falls in band except blanks
        let mut frames: Vec<Frame> = (0..9).map(|t| Frame::filled(8, 8, 0.5, t)).collect();
        frames[2] = textured(8, 8, 2);
        let (out, removed) = filter_outliers(&video(frames), &PreprocessConfig::default()).unwrap();
        assert!(out.len() >= 4);
        assert_eq!(out.len() + removed.len(), 9);
    }

    #[test]
    fn subsample_examples() {
        assert_eq!(uniform_subsample(&counted(360), 4).len(), 90);
        let v = uniform_subsample(&counted(12), 4);
        assert_eq!(v.frames.iter().map(|f| f.time_index).collect::<Vec<_>>(), vec![0, 4, 8]);
        assert_eq!(uniform_subsample(&counted(7), 1), counted(7));
        assert_eq!(uniform_subsample(&uniform_subsample(&counted(50), 2), 3), uniform_subsample(&counted(50), 6));
        let r = random_subsample(&counted(50), 4, 9);
        assert_eq!(r.len(), 13);
        assert!(r.frames.windows(2).all(|w| w[0].time_index < w[1].time_index));
        assert_eq!(r, random_subsample(&counted(50), 4, 9));
    }

    #[test]
    fn clip_and_resize_examples() {
        let cfg = PreprocessConfig { resize_to: 2, ..PreprocessConfig::default() };
        assert_eq!(clip_and_resize(&counted(500), &cfg).len(), 360);
        assert_eq!(clip_and_resize(&counted(100), &cfg).len(), 100);
        let v = video((0..3).map(|t| textured(16, 16, t)).collect());
        let same = clip_and_resize(&v, &PreprocessConfig { resize_to: 16, ..cfg });
        assert_eq!(same, v);
        let small = resize(&v, 8);
        assert_eq!(small.frame_shape(), (8, 8));
        // 2x downsampling with half-pixel centres averages 2x2 blocks
        let f = &v.frames[0];
        let avg = (f.at(0, 0) + f.at(0, 1) + f.at(1, 0) + f.at(1, 1)) / 4.0;
        assert!((small.frames[0].at(0, 0) - avg).abs() < 1e-6);
    }

    #[test]
    fn composed_length() {
        let cfg = PreprocessConfig { resize_to: 4, clip_max_frames: 20, subsample_stride: 3, ..PreprocessConfig::default() };
        let v = video((0..30).map(|t| textured(4, 4, t)).collect());
        let (out, removed) = preprocess_video(&v, &cfg, true).unwrap();
        assert!(removed.is_empty());
        assert_eq!(out.len(), 20usize.div_ceil(3));
    }
}
