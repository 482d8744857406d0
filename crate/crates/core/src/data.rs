//! Videos, labels and the dataset manifest.
//!
//! Manifest text format, one record per line after the header:
//!
//! ```text
//! #stpt-manifest v1
//! video_id<TAB>treatment_id<TAB>path<TAB>frame_count<TAB>transferred(0|1)[<TAB>n_transferred<TAB>n_births]
//! ```

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub const MANIFEST_HEADER: &str = "#stpt-manifest v1";
pub const SCHEMA_VERSION: u32 = 1;

/// One grayscale frame, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub pixels: alloc::vec::Vec<f32>,
    /// Acquisition slot of this frame in the original recording.
    pub time_index: u32,
}

impl Frame {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>, time_index: u32) -> Result<Self> {
        if pixels.len() != height * width || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!("{} pixels for a {height}x{width} frame", pixels.len())));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Integrity(format!("frame {time_index} has pixels outside [0, 1]")));
        }
        Ok(Frame { height, width, pixels, time_index })
    }

    pub fn filled(height: usize, width: usize, value: f32, time_index: u32) -> Self {
        Frame { height, width, pixels: alloc::vec![value; height * width], time_index }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.pixels[y * self.width + x]
    }
}

/// Births over embryos transferred for one treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViabilityLabel {
    n_transferred: u32,
    n_births: u32,
}

impl ViabilityLabel {
    pub fn new(n_transferred: u32, n_births: u32) -> Result<Self> {
        if n_transferred == 0 || n_births > n_transferred {
            return Err(Error::Integrity(format!("invalid label: {n_births} births of {n_transferred} transferred")));
        }
        Ok(ViabilityLabel { n_transferred, n_births })
    }

    pub fn n_transferred(&self) -> u32 {
        self.n_transferred
    }

    pub fn n_births(&self) -> u32 {
        self.n_births
    }

    /// The regression target.
    pub fn p(&self) -> f64 {
        self.n_births as f64 / self.n_transferred as f64
    }
}

/// One time-lapse video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub video_id: String,
    pub treatment_id: String,
    pub frames: Vec<Frame>,
    pub transferred: bool,
    pub label: Option<ViabilityLabel>,
}

impl VideoSample {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// (height, width) of the first frame; (0, 0) when empty.
    pub fn frame_shape(&self) -> (usize, usize) {
        self.frames.first().map_or((0, 0), |f| (f.height, f.width))
    }

    /// Same identity and label with a different frame list.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Self {
        VideoSample {
            video_id: self.video_id.clone(),
            treatment_id: self.treatment_id.clone(),
            frames,
            transferred: self.transferred,
            label: self.label,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Integrity(format!("video `{}` has no frames", self.video_id)));
        }
        if self.label.is_some() && !self.transferred {
            return Err(Error::Integrity(format!("video `{}` is labeled but not transferred", self.video_id)));
        }
        let (h, w) = self.frame_shape();
        for pair in self.frames.windows(2) {
            if pair[1].time_index <= pair[0].time_index {
                return Err(Error::Integrity(format!("video `{}` frames are not time-ordered", self.video_id)));
            }
        }
        if self.frames.iter().any(|f| f.height != h || f.width != w) {
            return Err(Error::Integrity(format!("video `{}` mixes frame sizes", self.video_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub video_id: String,
    pub treatment_id: String,
    /// Frame directory, relative to the manifest file.
    pub path: String,
    pub frame_count: usize,
    pub transferred: bool,
    pub label: Option<ViabilityLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub records: Vec<ManifestRecord>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

impl DatasetManifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let m = DatasetManifest { schema_version: SCHEMA_VERSION, records };
        m.validate()?;
        Ok(m)
    }

    /// Parse and validate manifest text. Filesystem checks are the caller's.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == MANIFEST_HEADER => {}
            Some((_, h)) if h.starts_with("#stpt-manifest") => {
                return Err(Error::Version(format!("unsupported manifest header `{h}`")))
            }
            _ => return Err(parse_err(1, format!("missing `{MANIFEST_HEADER}` header"))),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 && f.len() != 7 {
                return Err(parse_err(n, format!("expected 5 or 7 tab-separated fields, found {}", f.len())));
            }
            if f[..3].iter().any(|s| s.is_empty()) {
                return Err(parse_err(n, "empty id or path"));
            }
            let frame_count = f[3].parse().map_err(|_| parse_err(n, format!("bad frame count `{}`", f[3])))?;
            let transferred = match f[4] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(n, format!("transferred must be 0 or 1, found `{other}`"))),
            };
            let label = if f.len() == 7 {
                let nt: u32 = f[5].parse().map_err(|_| parse_err(n, format!("bad n_transferred `{}`", f[5])))?;
                let nb: u32 = f[6].parse().map_err(|_| parse_err(n, format!("bad n_births `{}`", f[6])))?;
                Some(ViabilityLabel::new(nt, nb)?)
            } else {
                None
            };
            records.push(ManifestRecord {
                video_id: f[0].to_string(),
                treatment_id: f[1].to_string(),
                path: f[2].to_string(),
                frame_count,
                transferred,
                label,
            });
        }
        Self::new(records)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(r.video_id.as_str()) {
                return Err(Error::Integrity(format!("duplicate video_id `{}`", r.video_id)));
            }
            if r.label.is_some() && !r.transferred {
                return Err(Error::Integrity(format!("`{}` has a label but is not transferred", r.video_id)));
            }
            if r.frame_count == 0 {
                return Err(Error::Integrity(format!("`{}` has zero frames", r.video_id)));
            }
            for s in [&r.video_id, &r.treatment_id, &r.path] {
                if s.contains('\t') || s.contains('\n') {
                    return Err(Error::Integrity(format!("field `{s}` contains a tab or newline")));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}",
                r.video_id,
                r.treatment_id,
                r.path,
                r.frame_count,
                u8::from(r.transferred)
            ));
            if let Some(l) = r.label {
                out.push_str(&format!("\t{}\t{}", l.n_transferred, l.n_births));
            }
            out.push('\n');
        }
        out
    }

    /// Records sorted by video id.
    pub fn canonical(&self) -> Self {
        let mut m = self.clone();
        m.records.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        m
    }

    pub fn get(&self, video_id: &str) -> Result<&ManifestRecord> {
        self.records.iter().find(|r| r.video_id == video_id).ok_or_else(|| Error::MissingId(video_id.into()))
    }

    pub fn labeled(&self) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(|r| r.label.is_some())
    }
}

/// Partition the labeled videos into `k` folds, keeping every treatment
/// group inside one fold. Groups are shuffled by `seed`, then placed largest
/// first into the currently smallest fold, so fold sizes differ by at most
/// one group.
pub fn split_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need k >= 2 folds, got {k}")));
    }
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in manifest.labeled() {
        groups.entry(r.treatment_id.as_str()).or_default().push(r.video_id.clone());
    }
    if groups.len() < k {
        return Err(Error::InsufficientGroups { have: groups.len(), need: k });
    }
    let mut order: Vec<Vec<String>> = groups.into_values().collect();
    order.shuffle(&mut rng::rng(rng::derive(seed, &[rng::tag("folds")])));
    // stable: equal-size groups keep their shuffled order
    order.sort_by_key(|g| core::cmp::Reverse(g.len()));
    let mut folds: Vec<Vec<String>> = alloc::vec![Vec::new(); k];
    for g in order {
        let target = (0..k).min_by_key(|&f| (folds[f].len(), f)).expect("k >= 2");
        folds[target].extend(g);
    }
    Ok(folds)
}
