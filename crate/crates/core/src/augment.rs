//! Spatial augmentation with temporally-consistent views.
//!
//! In consistent mode one [`DrawnTransform`] is drawn per view and applied to
//! every frame; only the pixel-noise realization changes frame to frame. In
//! per-frame mode every frame draws its own transform.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::{Frame, VideoSample};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentPolicy {
    pub enable_flip: bool,
    /// Quarter turns (0, 90, 180, 270 degrees).
    pub enable_rotation: bool,
    /// Extra continuous rotation drawn from +-this many degrees; 0 disables.
    pub rotation_jitter_deg: f32,
    pub enable_brightness: bool,
    pub brightness_max: f32,
    pub enable_contrast: bool,
    pub contrast_range: (f32, f32),
    pub enable_noise: bool,
    pub noise_sigma: f32,
    pub temporally_consistent: bool,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            enable_flip: true,
            enable_rotation: true,
            rotation_jitter_deg: 0.0,
            enable_brightness: true,
            brightness_max: 0.2,
            enable_contrast: true,
            contrast_range: (0.8, 1.25),
            enable_noise: true,
            noise_sigma: 0.02,
            temporally_consistent: true,
        }
    }
}

impl AugmentPolicy {
    /// Only flips enabled.
    pub fn flip_only() -> Self {
        AugmentPolicy {
            enable_flip: true,
            enable_rotation: false,
            enable_brightness: false,
            enable_contrast: false,
            enable_noise: false,
            ..Self::default()
        }
    }

    pub fn any_enabled(&self) -> bool {
        self.enable_flip
            || self.enable_rotation
            || self.rotation_jitter_deg > 0.0
            || self.enable_brightness
            || self.enable_contrast
            || self.enable_noise
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !self.any_enabled() {
            return bad("augment: at least one augmentation must be enabled");
        }
        if !(0.0..=1.0).contains(&self.brightness_max) {
            return bad("augment.brightness_max must be in [0, 1]");
        }
        let (lo, hi) = self.contrast_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("augment.contrast range must satisfy 0 < min <= max");
        }
        if !(self.noise_sigma >= 0.0) || !(0.0..=45.0).contains(&self.rotation_jitter_deg) {
            return bad("augment: noise sigma must be >= 0 and rotation jitter within [0, 45] degrees");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    None,
    Horizontal,
    Vertical,
}

/// Concrete parameters of one augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawnTransform {
    pub flip: Flip,
    pub quarter_turns: u8,
    pub angle_deg: f32,
    pub brightness: f32,
    pub contrast: f32,
    pub noise_sigma: f32,
    pub noise_seed: u64,
}

impl DrawnTransform {
    pub const IDENTITY: DrawnTransform = DrawnTransform {
        flip: Flip::None,
        quarter_turns: 0,
        angle_deg: 0.0,
        brightness: 0.0,
        contrast: 1.0,
        noise_sigma: 0.0,
        noise_seed: 0,
    };
}

pub fn draw_transform(policy: &AugmentPolicy, seed: u64) -> DrawnTransform {
    let mut r = rng::rng(rng::derive(seed, &[rng::tag("transform")]));
    let mut t = DrawnTransform::IDENTITY;
    if policy.enable_flip {
        t.flip = [Flip::None, Flip::Horizontal, Flip::Vertical][r.random_range(0..3usize)];
    }
    if policy.enable_rotation {
        t.quarter_turns = r.random_range(0..4u8);
    }
    if policy.rotation_jitter_deg > 0.0 {
        t.angle_deg = r.random_range(-policy.rotation_jitter_deg..=policy.rotation_jitter_deg);
    }
    if policy.enable_brightness && policy.brightness_max > 0.0 {
        t.brightness = r.random_range(-policy.brightness_max..=policy.brightness_max);
    }
    if policy.enable_contrast {
        let (lo, hi) = policy.contrast_range;
        t.contrast = if lo < hi { r.random_range(lo..=hi) } else { lo };
    }
    if policy.enable_noise {
        t.noise_sigma = policy.noise_sigma;
    }
    t.noise_seed = r.random();
    t
}

fn geometric(frame: &Frame, t: &DrawnTransform) -> Frame {
    let (mut h, mut w) = (frame.height, frame.width);
    let mut px = frame.pixels.clone();
    match t.flip {
        Flip::None => {}
        Flip::Horizontal => px.chunks_mut(w).for_each(|row| row.reverse()),
        Flip::Vertical => {
            px = (0..h).rev().flat_map(|y| frame.pixels[y * w..(y + 1) * w].iter().copied()).collect();
        }
    }
    for _ in 0..t.quarter_turns % 4 {
        // 90 degrees counter-clockwise: out[y][x] = in[x][w - 1 - y]
        let mut out = Vec::with_capacity(px.len());
        for y in 0..w {
            for x in 0..h {
                out.push(px[x * w + (w - 1 - y)]);
            }
        }
        px = out;
        core::mem::swap(&mut h, &mut w);
    }
    if t.angle_deg != 0.0 {
        px = rotate_bilinear(&px, h, w, t.angle_deg);
    }
    Frame { height: h, width: w, pixels: px, time_index: frame.time_index }
}

/// Rotate about the image centre; samples falling outside replicate the
/// nearest edge pixel.
fn rotate_bilinear(px: &[f32], h: usize, w: usize, deg: f32) -> Vec<f32> {
    let a = deg.to_radians();
    let (c, s) = (libm::cosf(a), libm::sinf(a));
    let (cy, cx) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f32 - cx, y as f32 - cy);
            let sx = (c * dx + s * dy + cx).clamp(0.0, (w - 1) as f32);
            let sy = (-s * dx + c * dy + cy).clamp(0.0, (h - 1) as f32);
            let (x0, y0) = (sx as usize, sy as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (tx, ty) = (sx - x0 as f32, sy - y0 as f32);
            let top = px[y0 * w + x0] * (1.0 - tx) + px[y0 * w + x1] * tx;
            let bot = px[y1 * w + x0] * (1.0 - tx) + px[y1 * w + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

/// Apply `t` to one frame. `noise_stream` selects the noise realization.
pub fn apply_transform(frame: &Frame, t: &DrawnTransform, noise_stream: u64) -> Frame {
    let mut f = geometric(frame, t);
    let photometric = t.contrast != 1.0 || t.brightness != 0.0;
    let mut noise = (t.noise_sigma > 0.0).then(|| rng::rng(rng::derive(t.noise_seed, &[noise_stream])));
    if photometric || noise.is_some() {
        for v in &mut f.pixels {
            let mut x = (*v - 0.5) * t.contrast + 0.5 + t.brightness;
            if let Some(r) = noise.as_mut() {
                x += t.noise_sigma * rng::normal(r) as f32;
            }
            *v = x.clamp(0.0, 1.0);
        }
    }
    f
}

/// The transform each frame of a `len`-frame view receives.
pub fn frame_transforms(len: usize, policy: &AugmentPolicy, seed: u64) -> Vec<DrawnTransform> {
    if policy.temporally_consistent {
        alloc::vec![draw_transform(policy, seed); len]
    } else {
        (0..len).map(|t| draw_transform(policy, rng::derive(seed, &[rng::tag("frame"), t as u64]))).collect()
    }
}

/// One augmented view of `video`.
pub fn apply_view(video: &VideoSample, policy: &AugmentPolicy, seed: u64) -> VideoSample {
    let transforms = frame_transforms(video.len(), policy, seed);
    let frames = video
        .frames
        .iter()
        .zip(&transforms)
        .enumerate()
        .map(|(i, (f, t))| apply_transform(f, t, i as u64))
        .collect();
    video.with_frames(frames)
}
