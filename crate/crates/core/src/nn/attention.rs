use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{gemm, gemm_into, Linear, Mat, Module, Param, View};
use crate::math::{expf, sqrtf};
use crate::rng::Rng;

/// Multi-head self-attention over one sequence with a key validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub qkv: Linear,
    pub proj: Linear,
    pub heads: usize,
}

#[derive(Debug)]
pub struct AttentionCache {
    x: Mat,
    qkv: Mat,
    /// Softmax weights, `heads × L × L`.
    attn: Vec<f32>,
    ctx: Mat,
}

impl MultiHeadAttention {
    pub fn new(name: &str, d: usize, heads: usize, rng: &mut Rng) -> Self {
        assert!(heads > 0 && d % heads == 0, "width {d} not divisible by {heads} heads");
        MultiHeadAttention {
            qkv: Linear::new(&format!("{name}.qkv"), d, 3 * d, 1.0, rng),
            proj: Linear::new(&format!("{name}.proj"), d, d, 1.0, rng),
            heads,
        }
    }

    fn width(&self) -> usize {
        self.proj.d_out()
    }

    pub fn forward(&self, x: &Mat, valid: &[bool]) -> (Mat, AttentionCache) {
        let (l, d) = (x.rows, self.width());
        assert_eq!(valid.len(), l, "mask length");
        let dh = d / self.heads;
        let scale = 1.0 / sqrtf(dh as f32);
        let qkv = self.qkv.forward(x);
        let mut attn = vec![0.0f32; self.heads * l * l];
        let mut ctx = Mat::zeros(l, d);
        for h in 0..self.heads {
            let a = &mut attn[h * l * l..(h + 1) * l * l];
            let q = View { data: &qkv.data, off: h * dh, rs: 3 * d, cs: 1 };
            let kt = View { data: &qkv.data, off: d + h * dh, rs: 1, cs: 3 * d };
            gemm(l, dh, l, q, kt, 0.0, a);
            for i in 0..l {
                let row = &mut a[i * l..(i + 1) * l];
                let mut max = f32::NEG_INFINITY;
                for j in 0..l {
                    if valid[j] {
                        max = max.max(row[j] * scale);
                    }
                }
                let mut sum = 0.0;
                for j in 0..l {
                    row[j] = if valid[j] { expf(row[j] * scale - max) } else { 0.0 };
                    sum += row[j];
                }
                row.iter_mut().for_each(|v| *v /= sum);
            }
            let v = View { data: &qkv.data, off: 2 * d + h * dh, rs: 3 * d, cs: 1 };
            gemm_into(l, l, dh, View::rows(a, l), v, 0.0, &mut ctx.data, h * dh, d);
        }
        let out = self.proj.forward(&ctx);
        (out, AttentionCache { x: x.clone(), qkv, attn, ctx })
    }

    pub fn backward(&mut self, cache: &AttentionCache, dout: &Mat) -> Mat {
        let l = dout.rows;
        let d = self.width();
        let dh = d / self.heads;
        let scale = 1.0 / sqrtf(dh as f32);
        let dctx = self.proj.backward(&cache.ctx, dout, true).expect("dx requested");
        let mut dqkv = Mat::zeros(l, 3 * d);
        let mut da = vec![0.0f32; l * l];
        for h in 0..self.heads {
            let a = &cache.attn[h * l * l..(h + 1) * l * l];
            let dc = View { data: &dctx.data, off: h * dh, rs: d, cs: 1 };
            let vt = View { data: &cache.qkv.data, off: 2 * d + h * dh, rs: 1, cs: 3 * d };
            gemm(l, dh, l, dc, vt, 0.0, &mut da);
            gemm_into(l, l, dh, View::trans(a, l), dc, 0.0, &mut dqkv.data, 2 * d + h * dh, 3 * d);
            for i in 0..l {
                let ar = &a[i * l..(i + 1) * l];
                let dr = &mut da[i * l..(i + 1) * l];
                let dotp: f32 = ar.iter().zip(dr.iter()).map(|(x, y)| x * y).sum();
                for j in 0..l {
                    dr[j] = ar[j] * (dr[j] - dotp) * scale;
                }
            }
            let k = View { data: &cache.qkv.data, off: d + h * dh, rs: 3 * d, cs: 1 };
            let q = View { data: &cache.qkv.data, off: h * dh, rs: 3 * d, cs: 1 };
            gemm_into(l, l, dh, View::rows(&da, l), k, 0.0, &mut dqkv.data, h * dh, 3 * d);
            gemm_into(l, l, dh, View::trans(&da, l), q, 0.0, &mut dqkv.data, d + h * dh, 3 * d);
        }
        self.qkv.backward(&cache.x, &dqkv, true).expect("dx requested")
    }
}

impl Module for MultiHeadAttention {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.qkv.params();
        v.extend(self.proj.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.qkv.params_mut();
        v.extend(self.proj.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn gradients_match_finite_differences_with_mask() {
        let mut rng = crate::rng::rng(11);
        let mut att = MultiHeadAttention::new("a", 8, 2, &mut rng);
        let valid = [true, true, false, true, false];
        let mut x = Mat::from_vec(5, 8, probe(40, 12));
        let mut w = probe(40, 13);
        // pooled objective only reads valid rows
        for r in 0..5 {
            if !valid[r] {
                w[r * 8..(r + 1) * 8].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let (_, cache) = att.forward(&x, &valid);
        let dx = att.backward(&cache, &Mat::from_vec(5, 8, w.clone()));
        let a2 = att.clone();
        let err = check_grad(&mut x.data, &dx.data, 0..40, 1e-2, |xs| {
            dot(&a2.forward(&Mat::from_vec(5, 8, xs.to_vec()), &valid).0.data, &w)
        });
        assert!(err < 3e-3, "{err}");
        // invalid positions never influence valid outputs
        for r in [2usize, 4] {
            assert!(dx.row(r).iter().all(|g| *g == 0.0));
        }
        let grad = att.qkv.weight.grad.clone();
        let mut wv = att.qkv.weight.value.clone();
        let n = wv.len();
        let err = check_grad(&mut wv, &grad, (0..n).step_by(3), 1e-2, |ws| {
            let mut a = att.clone();
            a.qkv.weight.value = ws.to_vec();
            dot(&a.forward(&x, &valid).0.data, &w)
        });
        assert!(err < 3e-3, "{err}");
    }
}
