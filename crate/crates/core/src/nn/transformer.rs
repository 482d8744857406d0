use alloc::format;
use alloc::vec::Vec;

use super::{gelu, gelu_backward, AttentionCache, LayerNorm, LayerNormCache, Linear, Mat, Module, MultiHeadAttention, Param};
use crate::rng::Rng;

/// Pre-norm transformer encoder block: `x + attn(ln(x))`, then `x + mlp(ln(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug)]
pub struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    h2: Mat,
    pre: Mat,
    act: Mat,
}

impl TransformerBlock {
    pub fn new(name: &str, d: usize, heads: usize, mlp: usize, rng: &mut Rng) -> Self {
        TransformerBlock {
            ln1: LayerNorm::new(&format!("{name}.ln1"), d),
            attn: MultiHeadAttention::new(&format!("{name}.attn"), d, heads, rng),
            ln2: LayerNorm::new(&format!("{name}.ln2"), d),
            fc1: Linear::new(&format!("{name}.fc1"), d, mlp, 1.0, rng),
            fc2: Linear::new(&format!("{name}.fc2"), mlp, d, 1.0, rng),
        }
    }

    pub fn forward(&self, x: &Mat, valid: &[bool]) -> (Mat, BlockCache) {
        let (h1, ln1) = self.ln1.forward(x);
        let (a, attn) = self.attn.forward(&h1, valid);
        let mut x2 = x.clone();
        x2.add_assign(&a);
        let (h2, ln2) = self.ln2.forward(&x2);
        let pre = self.fc1.forward(&h2);
        let act = Mat { data: pre.data.iter().map(|&v| gelu(v)).collect(), ..pre.clone() };
        let m = self.fc2.forward(&act);
        x2.add_assign(&m);
        (x2, BlockCache { ln1, attn, ln2, h2, pre, act })
    }

    pub fn backward(&mut self, cache: &BlockCache, dout: &Mat) -> Mat {
        let mut dact = self.fc2.backward(&cache.act, dout, true).expect("dx");
        dact.data.iter_mut().zip(&cache.pre.data).for_each(|(g, &p)| *g *= gelu_backward(p));
        let dh2 = self.fc1.backward(&cache.h2, &dact, true).expect("dx");
        let mut dx2 = self.ln2.backward(&cache.ln2, &dh2);
        dx2.add_assign(dout);
        let dh1 = self.attn.backward(&cache.attn, &dx2);
        let mut dx = self.ln1.backward(&cache.ln1, &dh1);
        dx.add_assign(&dx2);
        dx
    }
}

impl Module for TransformerBlock {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.ln1.params();
        v.extend(self.attn.params());
        v.extend(self.ln2.params());
        v.extend(self.fc1.params());
        v.extend(self.fc2.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.ln1.params_mut();
        v.extend(self.attn.params_mut());
        v.extend(self.ln2.params_mut());
        v.extend(self.fc1.params_mut());
        v.extend(self.fc2.params_mut());
        v
    }
}
