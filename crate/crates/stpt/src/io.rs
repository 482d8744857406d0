//! Corpus directories, PNG frames, outlier sidecars and checkpoint files.
//!
//! A corpus directory looks like
//!
//! ```text
//! manifest.tsv
//! videos/v0000/frame_00000.png ...
//! videos/v0000.outliers          (synthetic corpora only)
//! ```
//!
//! Manifest paths are relative to the directory holding the manifest.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use stpt_core::data::{DatasetManifest, Frame, ManifestRecord, VideoSample};
use stpt_core::pipeline::StageCheckpoint;
use stpt_core::synth::{self, SynthConfig};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] stpt_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt frame {}: {msg}", path.display())]
    Frame { path: PathBuf, msg: String },
    #[error("{}: {msg}", path.display())]
    ConfigFile { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Core(e) => e.category(),
            Error::Io { .. } => "io",
            Error::Frame { .. } => "corrupt-frame",
            Error::ConfigFile { .. } => "config-schema",
            Error::Usage(_) => "usage",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.png")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Write through a temporary sibling and rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_frame(path: &Path, time_index: u32) -> Result<Frame> {
    let corrupt = |msg: String| Error::Frame { path: path.to_path_buf(), msg };
    let file = fs::File::open(path).map_err(|e| corrupt(e.to_string()))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| corrupt(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| corrupt("image too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| corrupt(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(corrupt("unexpanded palette image".into())),
    };
    let pixels = data
        .chunks_exact(channels)
        .map(|px| match channels {
            1 | 2 => px[0] as f32 / 255.0,
            // luma of colour frames
            _ => (0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32).round() / 255.0,
        })
        .collect();
    Frame::new(h, w, pixels, time_index).map_err(|e| corrupt(e.to_string()))
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, frame.width as u32, frame.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        let data: Vec<u8> = frame.pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        w.write_image_data(&data).expect("in-memory PNG data");
    }
    out
}

pub fn write_video(dir: &Path, video: &VideoSample) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, f) in video.frames.iter().enumerate() {
        let p = dir.join(frame_name(i));
        fs::write(&p, encode_frame(f)).map_err(io_err(&p))?;
    }
    Ok(())
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("frame_") && name.ends_with(".png")
        })
        .collect();
    files.sort();
    Ok(files)
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

/// Parse and validate a manifest, then check every record against disk.
/// `path` may name the manifest file or the directory that holds it.
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let text = read_text(&file)?;
    let manifest = DatasetManifest::parse(&text)?;
    let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    for r in &manifest.records {
        let dir = root.join(&r.path);
        if !dir.is_dir() {
            return Err(stpt_core::Error::Integrity(format!("{}: frame directory {} is missing", r.video_id, dir.display())).into());
        }
        let n = frame_files(&dir)?.len();
        if n != r.frame_count {
            return Err(stpt_core::Error::Integrity(format!("{}: manifest lists {} frames, {} holds {n}", r.video_id, r.frame_count, dir.display())).into());
        }
    }
    Ok(Corpus { root, manifest })
}

impl Corpus {
    pub fn record(&self, video_id: &str) -> Result<&ManifestRecord> {
        Ok(self.manifest.get(video_id)?)
    }

    /// Frames in filename order, `time_index` = position.
    pub fn load_video(&self, video_id: &str) -> Result<VideoSample> {
        let r = self.record(video_id)?;
        let dir = self.root.join(&r.path);
        let files = frame_files(&dir)?;
        let mut frames = Vec::with_capacity(r.frame_count);
        for i in 0..r.frame_count {
            let expect = dir.join(frame_name(i));
            if files.get(i) != Some(&expect) {
                return Err(Error::Frame { path: expect, msg: "missing".into() });
            }
            frames.push(read_frame(&expect, i as u32)?);
        }
        let v = VideoSample {
            video_id: r.video_id.clone(),
            treatment_id: r.treatment_id.clone(),
            frames,
            transferred: r.transferred,
            label: r.label,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn load_all(&self) -> Result<Vec<VideoSample>> {
        self.manifest.records.iter().map(|r| self.load_video(&r.video_id)).collect()
    }

    /// Ground-truth outlier indices, if the corpus has a sidecar for `video_id`.
    pub fn outliers(&self, video_id: &str) -> Result<Option<Vec<usize>>> {
        let r = self.record(video_id)?;
        let p = sidecar_path(&self.root, &r.path, video_id);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(synth::parse_outlier_sidecar(&read_text(&p)?)?))
    }
}

fn sidecar_path(root: &Path, video_path: &str, video_id: &str) -> PathBuf {
    let dir = root.join(video_path);
    dir.parent().unwrap_or(root).join(format!("{video_id}.outliers"))
}

pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    write_atomic(&dir.join(MANIFEST_FILE), manifest.to_text().as_bytes())
}

/// Render a synthetic corpus: frames, sidecars and manifest.
pub fn generate_corpus(cfg: &SynthConfig, out: &Path) -> Result<DatasetManifest> {
    let plan = synth::plan_corpus(cfg)?;
    for p in &plan.videos {
        let video = synth::render_video(cfg, p);
        let rec = p.manifest_record();
        write_video(&out.join(&rec.path), &video)?;
        let side = sidecar_path(out, &rec.path, &p.video_id);
        fs::write(&side, synth::outlier_sidecar(p)).map_err(io_err(&side))?;
    }
    let manifest = plan.manifest();
    write_manifest(out, &manifest)?;
    Ok(manifest)
}

pub fn save_checkpoint(path: &Path, ck: &StageCheckpoint) -> Result<()> {
    write_atomic(path, &ck.encode())
}

pub fn load_checkpoint(path: &Path) -> Result<StageCheckpoint> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(StageCheckpoint::decode(&bytes)?)
}

/// Append-free writer for small text artifacts.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let f = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}
