use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{frames_to_batch, EmbeddingSequence, Trainable};
use crate::data::VideoSample;
use crate::error::{Error, Result};
use crate::nn::{
    relu_backward, relu_inplace, BlockCache, Conv2d, ConvCache, Image, LayerNorm, LayerNormCache, Linear, Mat, Module,
    Param, TransformerBlock,
};
use crate::rng::{self, Rng};

/// Architecture descriptor, serialized next to the weights so that a
/// checkpoint describes itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpatialArch {
    /// Stride-2 3×3 conv blocks, global average pool, linear projection.
    Conv { input: usize, channels: Vec<usize>, width: usize },
    /// Patch-embedding vision transformer with a class token.
    Vit { input: usize, patch: usize, width: usize, depth: usize, heads: usize, mlp: usize },
}

impl SpatialArch {
    pub fn desk() -> Self {
        SpatialArch::Conv { input: 64, channels: vec![16, 32, 64, 64], width: 64 }
    }

    /// DeiT-Tiny sized: 224 input, 16 patches, width 192, 12 blocks, 3 heads.
    pub fn method_scale() -> Self {
        SpatialArch::Vit { input: 224, patch: 16, width: 192, depth: 12, heads: 3, mlp: 768 }
    }

    pub fn width(&self) -> usize {
        match self {
            SpatialArch::Conv { width, .. } | SpatialArch::Vit { width, .. } => *width,
        }
    }

    pub fn input(&self) -> usize {
        match self {
            SpatialArch::Conv { input, .. } | SpatialArch::Vit { input, .. } => *input,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self {
            SpatialArch::Conv { input, channels, width } => {
                if channels.is_empty() || *width == 0 || *input == 0 {
                    return bad("conv encoder needs channels, width and input size".into());
                }
            }
            SpatialArch::Vit { input, patch, width, depth, heads, mlp } => {
                if *patch == 0 || input % patch != 0 {
                    return bad(format!("input {input} not divisible by patch {patch}"));
                }
                if *heads == 0 || width % heads != 0 || *depth == 0 || *mlp == 0 {
                    return bad(format!("width {width} not divisible by {heads} heads"));
                }
            }
        }
        Ok(())
    }

    pub fn descriptor(&self) -> String {
        match self {
            SpatialArch::Conv { input, channels, width } => {
                let ch: Vec<String> = channels.iter().map(|c| format!("{c}")).collect();
                format!("conv(input={input},channels={},width={width})", ch.join("-"))
            }
            SpatialArch::Vit { input, patch, width, depth, heads, mlp } => {
                format!("vit(input={input},patch={patch},width={width},depth={depth},heads={heads},mlp={mlp})")
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let err = || Error::Version(format!("unrecognized spatial architecture `{s}`"));
        let (kind, rest) = s.split_once('(').ok_or_else(err)?;
        let body = rest.strip_suffix(')').ok_or_else(err)?;
        let field = |name: &str| -> Result<&str> {
            body.split(',').find_map(|kv| kv.strip_prefix(name).and_then(|r| r.strip_prefix('='))).ok_or_else(err)
        };
        let num = |name: &str| -> Result<usize> { field(name)?.parse().map_err(|_| err()) };
        let arch = match kind {
            "conv" => SpatialArch::Conv {
                input: num("input")?,
                channels: field("channels")?.split('-').map(|c| c.parse().map_err(|_| err())).collect::<Result<_>>()?,
                width: num("width")?,
            },
            "vit" => SpatialArch::Vit {
                input: num("input")?,
                patch: num("patch")?,
                width: num("width")?,
                depth: num("depth")?,
                heads: num("heads")?,
                mlp: num("mlp")?,
            },
            _ => return Err(err()),
        };
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    pub convs: Vec<Conv2d>,
    pub proj: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vit {
    pub patch: usize,
    pub embed: Linear,
    pub cls: Param,
    pub pos: Param,
    pub blocks: Vec<TransformerBlock>,
    pub norm: LayerNorm,
}

#[derive(Debug, Clone, PartialEq)]
enum Net {
    Conv(ConvNet),
    Vit(Vit),
}

/// Frame encoder. Inference is a pure function of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialEncoder {
    arch: SpatialArch,
    net: Net,
    trainable: bool,
}

/// Activations kept from a training forward pass.
#[derive(Debug)]
pub enum SpatialForward {
    Conv { caches: Vec<ConvCache>, outs: Vec<Image>, pooled: Mat },
    Vit { patches: Mat, frames: Vec<(Vec<BlockCache>, LayerNormCache)>, tokens: usize },
}

impl ConvNet {
    fn new(input: usize, channels: &[usize], width: usize, rng: &mut Rng) -> Self {
        let _ = input;
        let mut c_in = 1;
        let convs = channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let conv = Conv2d::new(&format!("conv{i}"), c_in, c, 3, 2, 1, rng);
                c_in = c;
                conv
            })
            .collect();
        ConvNet { convs, proj: Linear::new("proj", c_in, width, 1.0, rng) }
    }

    fn forward(&self, x: Image, keep: bool) -> (Mat, Option<SpatialForward>) {
        let mut caches = Vec::new();
        let mut outs = Vec::new();
        let mut cur = x;
        for conv in &self.convs {
            let (mut y, cache) = conv.forward(&cur);
            relu_inplace(&mut y.data);
            if keep {
                caches.push(cache);
                outs.push(y.clone());
            }
            cur = y;
        }
        let hw = cur.h * cur.w;
        let mut pooled = Mat::zeros(cur.n, cur.c);
        for b in 0..cur.n {
            let out = pooled.row_mut(b);
            for p in 0..hw {
                let px = &cur.data[(b * hw + p) * cur.c..(b * hw + p + 1) * cur.c];
                out.iter_mut().zip(px).for_each(|(o, v)| *o += v);
            }
            out.iter_mut().for_each(|o| *o /= hw as f32);
        }
        let emb = self.proj.forward(&pooled);
        let fwd = keep.then_some(SpatialForward::Conv { caches, outs, pooled });
        (emb, fwd)
    }

    fn backward(&mut self, caches: &[ConvCache], outs: &[Image], pooled: &Mat, demb: &Mat) {
        let dpooled = self.proj.backward(pooled, demb, true).expect("dx");
        let last = outs.last().expect("at least one conv");
        let hw = last.h * last.w;
        let mut dy = Image::zeros(last.n, last.h, last.w, last.c);
        for b in 0..last.n {
            let g = dpooled.row(b);
            for p in 0..hw {
                let px = &mut dy.data[(b * hw + p) * last.c..(b * hw + p + 1) * last.c];
                px.iter_mut().zip(g).for_each(|(d, v)| *d = v / hw as f32);
            }
        }
        for l in (0..self.convs.len()).rev() {
            relu_backward(&outs[l].data, &mut dy.data);
            match self.convs[l].backward(&caches[l], &dy, l > 0) {
                Some(dx) => dy = dx,
                None => break,
            }
        }
    }
}

impl Vit {
    fn new(input: usize, patch: usize, width: usize, depth: usize, heads: usize, mlp: usize, rng: &mut Rng) -> Self {
        let n_patch = (input / patch) * (input / patch);
        let mut pos = Param::zeros("pos", &[n_patch + 1, width]);
        let mut cls = Param::zeros("cls", &[width]);
        for v in pos.value.iter_mut().chain(cls.value.iter_mut()) {
            *v = 0.02 * rng::normal(rng) as f32;
        }
        Vit {
            patch,
            embed: Linear::new("patch_embed", patch * patch, width, 1.0, rng),
            cls,
            pos,
            blocks: (0..depth).map(|i| TransformerBlock::new(&format!("block{i}"), width, heads, mlp, rng)).collect(),
            norm: LayerNorm::new("norm", width),
        }
    }

    fn patchify(&self, x: &Image) -> Mat {
        let p = self.patch;
        let (gh, gw) = (x.h / p, x.w / p);
        let mut m = Mat::zeros(x.n * gh * gw, p * p);
        for b in 0..x.n {
            for gy in 0..gh {
                for gx in 0..gw {
                    let row = m.row_mut((b * gh + gy) * gw + gx);
                    for py in 0..p {
                        let src = (b * x.h + gy * p + py) * x.w + gx * p;
                        row[py * p..(py + 1) * p].copy_from_slice(&x.data[src..src + p]);
                    }
                }
            }
        }
        m
    }

    fn forward(&self, x: Image, keep: bool) -> (Mat, Option<SpatialForward>) {
        let patches = self.patchify(&x);
        let emb = self.embed.forward(&patches);
        let d = emb.cols;
        let per = patches.rows / x.n.max(1);
        let tokens = per + 1;
        let valid = vec![true; tokens];
        let mut out = Mat::zeros(x.n, d);
        let mut frames = Vec::new();
        for b in 0..x.n {
            let mut seq = Mat::zeros(tokens, d);
            seq.row_mut(0).copy_from_slice(&self.cls.value);
            for t in 0..per {
                seq.row_mut(t + 1).copy_from_slice(emb.row(b * per + t));
            }
            seq.data.iter_mut().zip(&self.pos.value).for_each(|(s, p)| *s += p);
            let mut caches = Vec::new();
            for blk in &self.blocks {
                let (y, c) = blk.forward(&seq, &valid);
                if keep {
                    caches.push(c);
                }
                seq = y;
            }
            let (normed, nc) = self.norm.forward(&seq);
            out.row_mut(b).copy_from_slice(normed.row(0));
            if keep {
                frames.push((caches, nc));
            }
        }
        (out, keep.then_some(SpatialForward::Vit { patches, frames, tokens }))
    }

    fn backward(&mut self, patches: &Mat, frames: &[(Vec<BlockCache>, LayerNormCache)], tokens: usize, demb: &Mat) {
        let d = demb.cols;
        let per = tokens - 1;
        let mut dembed = Mat::zeros(patches.rows, d);
        for (b, (caches, nc)) in frames.iter().enumerate() {
            let mut dseq = Mat::zeros(tokens, d);
            dseq.row_mut(0).copy_from_slice(demb.row(b));
            dseq = self.norm.backward(nc, &dseq);
            for (blk, c) in self.blocks.iter_mut().zip(caches).rev() {
                dseq = blk.backward(c, &dseq);
            }
            self.pos.grad.iter_mut().zip(&dseq.data).for_each(|(g, v)| *g += v);
            self.cls.grad.iter_mut().zip(dseq.row(0)).for_each(|(g, v)| *g += v);
            for t in 0..per {
                dembed.row_mut(b * per + t).copy_from_slice(dseq.row(t + 1));
            }
        }
        self.embed.backward(patches, &dembed, false);
    }
}

impl SpatialEncoder {
    pub fn new(arch: &SpatialArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::rng(seed);
        let net = match arch {
            SpatialArch::Conv { input, channels, width } => Net::Conv(ConvNet::new(*input, channels, *width, &mut rng)),
            SpatialArch::Vit { input, patch, width, depth, heads, mlp } => {
                Net::Vit(Vit::new(*input, *patch, *width, *depth, *heads, *mlp, &mut rng))
            }
        };
        Ok(SpatialEncoder { arch: arch.clone(), net, trainable: true })
    }

    pub fn arch(&self) -> &SpatialArch {
        &self.arch
    }

    pub fn width(&self) -> usize {
        self.arch.width()
    }

    fn check(&self, video: &VideoSample) -> Result<()> {
        let (h, w) = video.frame_shape();
        let s = self.arch.input();
        if h != s || w != s {
            return Err(Error::ShapeMismatch(format!("frames are {h}x{w}, encoder expects {s}x{s}")));
        }
        Ok(())
    }

    fn run(&self, video: &VideoSample, keep: bool) -> Result<(EmbeddingSequence, Option<SpatialForward>)> {
        self.check(video)?;
        let x = frames_to_batch(video);
        let (emb, fwd) = match &self.net {
            Net::Conv(n) => n.forward(x, keep),
            Net::Vit(n) => n.forward(x, keep),
        };
        let seq = EmbeddingSequence::new(emb.cols, emb.data.iter().map(|&v| v as f64).collect())?;
        Ok((seq, fwd))
    }

    /// One embedding per frame, in frame order.
    pub fn encode_frames(&self, video: &VideoSample) -> Result<EmbeddingSequence> {
        self.run(video, false).map(|r| r.0)
    }

    /// Forward pass that keeps activations for [`SpatialEncoder::backward`].
    pub fn forward_train(&self, video: &VideoSample) -> Result<(EmbeddingSequence, SpatialForward)> {
        let (seq, fwd) = self.run(video, true)?;
        Ok((seq, fwd.expect("kept")))
    }

    /// Accumulate parameter gradients given dL/d(embeddings), row-major `T × width`.
    pub fn backward(&mut self, fwd: &SpatialForward, grad: &[f64]) {
        let d = self.width();
        let demb = Mat::from_vec(grad.len() / d, d, grad.iter().map(|&g| g as f32).collect());
        match (&mut self.net, fwd) {
            (Net::Conv(n), SpatialForward::Conv { caches, outs, pooled }) => n.backward(caches, outs, pooled, &demb),
            (Net::Vit(n), SpatialForward::Vit { patches, frames, tokens }) => n.backward(patches, frames, *tokens, &demb),
            _ => panic!("forward cache from a different architecture"),
        }
    }
}

impl Trainable for SpatialEncoder {
    fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }
    fn is_trainable(&self) -> bool {
        self.trainable
    }
}

impl Module for SpatialEncoder {
    fn params(&self) -> Vec<&Param> {
        match &self.net {
            Net::Conv(n) => {
                let mut v: Vec<&Param> = n.convs.iter().flat_map(|c| c.params()).collect();
                v.extend(n.proj.params());
                v
            }
            Net::Vit(n) => {
                let mut v = n.embed.params();
                v.push(&n.cls);
                v.push(&n.pos);
                v.extend(n.blocks.iter().flat_map(|b| b.params()));
                v.extend(n.norm.params());
                v
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match &mut self.net {
            Net::Conv(n) => {
                let mut v: Vec<&mut Param> = n.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
                v.extend(n.proj.params_mut());
                v
            }
            Net::Vit(n) => {
                let mut v = n.embed.params_mut();
                v.push(&mut n.cls);
                v.push(&mut n.pos);
                v.extend(n.blocks.iter_mut().flat_map(|b| b.params_mut()));
                v.extend(n.norm.params_mut());
                v
            }
        }
    }
}
