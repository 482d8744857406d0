use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{positional_encoding, EmbeddingSequence, Trainable, VideoEmbedding};
use crate::error::{Error, Result};
use crate::nn::{BlockCache, LayerNorm, LayerNormCache, Mat, Module, Param, TransformerBlock};
use crate::rng;

/// How per-position outputs become one video vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Average over valid positions.
    Mean,
    /// Output at position 0.
    First,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalArch {
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub mlp: usize,
    pub max_len: usize,
    pub pooling: Pooling,
}

impl TemporalArch {
    pub fn desk() -> Self {
        TemporalArch { width: 64, layers: 4, heads: 8, mlp: 128, max_len: 128, pooling: Pooling::Mean }
    }

    /// 4 layers, hidden size 192, 8 heads.
    pub fn method_scale() -> Self {
        TemporalArch { width: 192, layers: 4, heads: 8, mlp: 768, max_len: 128, pooling: Pooling::Mean }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.width % 2 != 0 || self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "temporal width {} must be even and divisible by {} heads",
                self.width, self.heads
            )));
        }
        if self.layers == 0 || self.mlp == 0 || self.max_len == 0 {
            return Err(Error::InvalidConfig("temporal encoder needs layers, mlp width and max length".into()));
        }
        Ok(())
    }

    pub fn descriptor(&self) -> String {
        let pool = match self.pooling {
            Pooling::Mean => "mean",
            Pooling::First => "first",
        };
        format!(
            "transformer(width={},layers={},heads={},mlp={},max_len={},pooling={pool})",
            self.width, self.layers, self.heads, self.mlp, self.max_len
        )
    }

    pub fn parse(s: &str) -> Result<Self> {
        let err = || Error::Version(format!("unrecognized temporal architecture `{s}`"));
        let body = s.strip_prefix("transformer(").and_then(|r| r.strip_suffix(')')).ok_or_else(err)?;
        let field = |name: &str| -> Result<&str> {
            body.split(',').find_map(|kv| kv.strip_prefix(name).and_then(|r| r.strip_prefix('='))).ok_or_else(err)
        };
        let num = |name: &str| -> Result<usize> { field(name)?.parse().map_err(|_| err()) };
        Ok(TemporalArch {
            width: num("width")?,
            layers: num("layers")?,
            heads: num("heads")?,
            mlp: num("mlp")?,
            max_len: num("max_len")?,
            pooling: match field("pooling")? {
                "mean" => Pooling::Mean,
                "first" => Pooling::First,
                _ => return Err(err()),
            },
        })
    }
}

/// Transformer over frame embeddings with sinusoidal positions and a
/// padding mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEncoder {
    arch: TemporalArch,
    blocks: Vec<TransformerBlock>,
    norm: LayerNorm,
    trainable: bool,
}

#[derive(Debug)]
pub struct TemporalForward {
    blocks: Vec<BlockCache>,
    norm: LayerNormCache,
    mask: Vec<bool>,
}

impl TemporalEncoder {
    pub fn new(arch: &TemporalArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut r = rng::rng(seed);
        let blocks =
            (0..arch.layers).map(|i| TransformerBlock::new(&format!("layer{i}"), arch.width, arch.heads, arch.mlp, &mut r)).collect();
        Ok(TemporalEncoder { arch: arch.clone(), blocks, norm: LayerNorm::new("norm", arch.width), trainable: true })
    }

    pub fn arch(&self) -> &TemporalArch {
        &self.arch
    }

    pub fn width(&self) -> usize {
        self.arch.width
    }

    fn run(&self, seq: &EmbeddingSequence, keep: bool) -> Result<(VideoEmbedding, Option<TemporalForward>)> {
        let (l, d) = (seq.len(), self.arch.width);
        if seq.width() != d {
            return Err(Error::ShapeMismatch(format!("sequence width {} vs temporal width {d}", seq.width())));
        }
        if l > self.arch.max_len {
            return Err(Error::Overlength { len: l, max: self.arch.max_len });
        }
        let n_valid = seq.valid_len();
        if n_valid == 0 || (self.arch.pooling == Pooling::First && !seq.mask()[0]) {
            return Err(Error::ShapeMismatch("sequence has no usable valid position".into()));
        }
        let pe = positional_encoding(l, d)?;
        let mut x = Mat::from_vec(l, d, seq.data().iter().zip(&pe).map(|(a, b)| (a + b) as f32).collect());
        let mask = seq.mask().to_vec();
        let mut caches = Vec::new();
        for blk in &self.blocks {
            let (y, c) = blk.forward(&x, &mask);
            if keep {
                caches.push(c);
            }
            x = y;
        }
        let (y, nc) = self.norm.forward(&x);
        let z = match self.arch.pooling {
            Pooling::Mean => {
                let mut z = vec![0.0f64; d];
                for r in (0..l).filter(|&r| mask[r]) {
                    z.iter_mut().zip(y.row(r)).for_each(|(a, b)| *a += *b as f64);
                }
                z.iter_mut().for_each(|a| *a /= n_valid as f64);
                z
            }
            Pooling::First => y.row(0).iter().map(|&v| v as f64).collect(),
        };
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("video embedding".into()));
        }
        Ok((VideoEmbedding(z), keep.then_some(TemporalForward { blocks: caches, norm: nc, mask })))
    }

    pub fn encode_video(&self, seq: &EmbeddingSequence) -> Result<VideoEmbedding> {
        self.run(seq, false).map(|r| r.0)
    }

    /// Pads every sequence to the longest one and encodes each under its mask.
    pub fn encode_batch(&self, seqs: &[EmbeddingSequence]) -> Result<Vec<VideoEmbedding>> {
        let longest = seqs.iter().map(EmbeddingSequence::len).max().unwrap_or(0);
        seqs.iter().map(|s| self.encode_video(&s.padded(longest))).collect()
    }

    pub fn forward_train(&self, seq: &EmbeddingSequence) -> Result<(VideoEmbedding, TemporalForward)> {
        let (z, f) = self.run(seq, true)?;
        Ok((z, f.expect("kept")))
    }

    /// Accumulate parameter gradients given dL/dz. Input gradients are not
    /// produced: the spatial encoder feeding this one is always frozen.
    pub fn backward(&mut self, fwd: &TemporalForward, dz: &[f64]) {
        let d = self.arch.width;
        let l = fwd.mask.len();
        let mut dy = Mat::zeros(l, d);
        match self.arch.pooling {
            Pooling::Mean => {
                let n = fwd.mask.iter().filter(|m| **m).count() as f64;
                for r in (0..l).filter(|&r| fwd.mask[r]) {
                    dy.row_mut(r).iter_mut().zip(dz).for_each(|(g, v)| *g = (v / n) as f32);
                }
            }
            Pooling::First => dy.row_mut(0).iter_mut().zip(dz).for_each(|(g, v)| *g = *v as f32),
        }
        let mut dx = self.norm.backward(&fwd.norm, &dy);
        for (blk, c) in self.blocks.iter_mut().zip(&fwd.blocks).rev() {
            dx = blk.backward(c, &dx);
        }
    }
}

impl Trainable for TemporalEncoder {
    fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }
    fn is_trainable(&self) -> bool {
        self.trainable
    }
}

impl Module for TemporalEncoder {
    fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.blocks.iter().flat_map(|b| b.params()).collect();
        v.extend(self.norm.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = self.blocks.iter_mut().flat_map(|b| b.params_mut()).collect();
        v.extend(self.norm.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn arch(pooling: Pooling) -> TemporalArch {
        TemporalArch { width: 8, layers: 2, heads: 2, mlp: 16, max_len: 12, pooling }
    }

    fn seq(len: usize, seed: u64) -> EmbeddingSequence {
        let mut r = rng::rng(seed);
        EmbeddingSequence::new(8, (0..len * 8).map(|_| rng::normal(&mut r)).collect()).unwrap()
    }

    fn close(a: &VideoEmbedding, b: &VideoEmbedding) -> bool {
        a.0.iter().zip(&b.0).all(|(x, y)| (x - y).abs() <= 1e-5 * (1.0 + x.abs()))
    }

    #[test]
    fn padding_does_not_change_the_embedding() {
        for pooling in [Pooling::Mean, Pooling::First] {
            let enc = TemporalEncoder::new(&arch(pooling), 1).unwrap();
            let s = seq(5, 2);
            assert!(close(&enc.encode_video(&s).unwrap(), &enc.encode_video(&s.padded(12)).unwrap()));
        }
    }

    #[test]
    fn batched_matches_one_at_a_time() {
        let enc = TemporalEncoder::new(&arch(Pooling::Mean), 4).unwrap();
        let seqs: Vec<EmbeddingSequence> = [3, 9, 1, 6].iter().zip(10..).map(|(&l, s)| seq(l, s)).collect();
        let batch = enc.encode_batch(&seqs).unwrap();
        for (s, z) in seqs.iter().zip(&batch) {
            assert!(close(&enc.encode_video(s).unwrap(), z));
        }
    }

    #[test]
    fn single_frame_and_overlength() {
        let enc = TemporalEncoder::new(&arch(Pooling::Mean), 7).unwrap();
        let z = enc.encode_video(&seq(1, 3)).unwrap();
        assert_eq!(z.width(), 8);
        assert!(z.0.iter().all(|v| v.is_finite()));
        assert!(matches!(enc.encode_video(&seq(13, 3)), Err(Error::Overlength { len: 13, max: 12 })));
    }
}
