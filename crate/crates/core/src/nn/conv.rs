use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{gemm, Module, Param, View};
use crate::rng::Rng;

/// Batch of images in NHWC layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Image { n, h, w, c, data: vec![0.0; n * h * w * c] }
    }
}

/// Square-kernel 2-D convolution, weights stored `[out, k, k, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// The unfolded input patches, needed for the weight gradient.
#[derive(Debug)]
pub struct ConvCache {
    cols: Vec<f32>,
    n: usize,
    h: usize,
    w: usize,
}

impl Conv2d {
    pub fn new(name: &str, c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize, rng: &mut Rng) -> Self {
        let fan_in = c_in * kernel * kernel;
        Conv2d {
            weight: Param::fan_in(format!("{name}.weight"), &[c_out, kernel, kernel, c_in], fan_in, core::f32::consts::SQRT_2, rng),
            bias: Param::zeros(format!("{name}.bias"), &[c_out]),
            kernel,
            stride,
            padding,
        }
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape[3]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let f = |x: usize| (x + 2 * self.padding - self.kernel) / self.stride + 1;
        (f(h), f(w))
    }

    fn im2col(&self, x: &Image) -> Vec<f32> {
        let (ho, wo) = self.out_size(x.h, x.w);
        let (k, c) = (self.kernel, x.c);
        let kk = k * k * c;
        let mut cols = vec![0.0f32; x.n * ho * wo * kk];
        for b in 0..x.n {
            let img = &x.data[b * x.h * x.w * c..(b + 1) * x.h * x.w * c];
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((b * ho + oy) * wo + ox) * kk;
                    for ky in 0..k {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix < 0 || ix >= x.w as isize {
                                continue;
                            }
                            let src = (iy as usize * x.w + ix as usize) * c;
                            let dst = row + (ky * k + kx) * c;
                            cols[dst..dst + c].copy_from_slice(&img[src..src + c]);
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&self, x: &Image) -> (Image, ConvCache) {
        assert_eq!(x.c, self.c_in(), "Conv2d input channels");
        let (ho, wo) = self.out_size(x.h, x.w);
        let cols = self.im2col(x);
        let kk = self.kernel * self.kernel * x.c;
        let p = x.n * ho * wo;
        let co = self.c_out();
        let mut out = Image::zeros(x.n, ho, wo, co);
        for r in 0..p {
            out.data[r * co..(r + 1) * co].copy_from_slice(&self.bias.value);
        }
        gemm(p, kk, co, View::rows(&cols, kk), View::trans(&self.weight.value, kk), 1.0, &mut out.data);
        (out, ConvCache { cols, n: x.n, h: x.h, w: x.w })
    }

    /// Accumulates parameter gradients and, when asked, returns the input gradient.
    pub fn backward(&mut self, cache: &ConvCache, dout: &Image, need_dx: bool) -> Option<Image> {
        let c = self.c_in();
        let k = self.kernel;
        let kk = k * k * c;
        let co = self.c_out();
        let p = dout.n * dout.h * dout.w;
        gemm(co, p, kk, View::trans(&dout.data, co), View::rows(&cache.cols, kk), 1.0, &mut self.weight.grad);
        for r in 0..p {
            self.bias.grad.iter_mut().zip(&dout.data[r * co..(r + 1) * co]).for_each(|(g, d)| *g += d);
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0f32; p * kk];
        gemm(p, co, kk, View::rows(&dout.data, co), View::rows(&self.weight.value, kk), 0.0, &mut dcols);
        let mut dx = Image::zeros(cache.n, cache.h, cache.w, c);
        let (ho, wo) = (dout.h, dout.w);
        for b in 0..cache.n {
            let base = b * cache.h * cache.w * c;
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((b * ho + oy) * wo + ox) * kk;
                    for ky in 0..k {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= cache.h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix < 0 || ix >= cache.w as isize {
                                continue;
                            }
                            let dst = base + (iy as usize * cache.w + ix as usize) * c;
                            let src = row + (ky * k + kx) * c;
                            dx.data[dst..dst + c].iter_mut().zip(&dcols[src..src + c]).for_each(|(a, g)| *a += g);
                        }
                    }
                }
            }
        }
        Some(dx)
    }
}

impl Module for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    fn naive(conv: &Conv2d, x: &Image) -> Image {
        let (ho, wo) = conv.out_size(x.h, x.w);
        let co = conv.c_out();
        let k = conv.kernel;
        let mut out = Image::zeros(x.n, ho, wo, co);
        for b in 0..x.n {
            for oy in 0..ho {
                for ox in 0..wo {
                    for o in 0..co {
                        let mut s = conv.bias.value[o];
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * conv.stride + ky) as isize - conv.padding as isize;
                                let ix = (ox * conv.stride + kx) as isize - conv.padding as isize;
                                if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                                    continue;
                                }
                                for ci in 0..x.c {
                                    let xv = x.data[((b * x.h + iy as usize) * x.w + ix as usize) * x.c + ci];
                                    let wv = conv.weight.value[((o * k + ky) * k + kx) * x.c + ci];
                                    s += xv * wv;
                                }
                            }
                        }
                        out.data[((b * ho + oy) * wo + ox) * co + o] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_direct_convolution() {
        let mut rng = crate::rng::rng(4);
        let mut conv = Conv2d::new("c", 2, 3, 3, 2, 1, &mut rng);
        conv.bias.value = probe(3, 5);
        let x = Image { n: 2, h: 7, w: 6, c: 2, data: probe(2 * 7 * 6 * 2, 6) };
        let (y, _) = conv.forward(&x);
        let want = naive(&conv, &x);
        assert_eq!((y.h, y.w), (4, 3));
        for (a, b) in y.data.iter().zip(&want.data) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::rng::rng(7);
        let mut conv = Conv2d::new("c", 2, 3, 3, 2, 1, &mut rng);
        let mut x = Image { n: 2, h: 5, w: 5, c: 2, data: probe(100, 8) };
        let (y, cache) = conv.forward(&x);
        let w = probe(y.data.len(), 9);
        let dy = Image { data: w.clone(), ..y.clone() };
        let dx = conv.backward(&cache, &dy, true).unwrap();
        let c2 = conv.clone();
        let shape = x.clone();
        let err = check_grad(&mut x.data, &dx.data, 0..100, 1e-2, |xs| {
            dot(&c2.forward(&Image { data: xs.to_vec(), ..shape.clone() }).0.data, &w)
        });
        assert!(err < 1e-3, "dx {err}");
        let grad = conv.weight.grad.clone();
        let mut wv = conv.weight.value.clone();
        let n = wv.len();
        let err = check_grad(&mut wv, &grad, 0..n, 1e-2, |ws| {
            let mut c = conv.clone();
            c.weight.value = ws.to_vec();
            dot(&c.forward(&x).0.data, &w)
        });
        assert!(err < 1e-3, "dW {err}");
    }
}
