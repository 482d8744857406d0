use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Mat, Module, Param};
use crate::math::sqrtf;

const EPS: f32 = 1e-5;

/// Per-row layer normalization with learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
}

#[derive(Debug)]
pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f32>,
}

impl LayerNorm {
    pub fn new(name: &str, d: usize) -> Self {
        LayerNorm { gamma: Param::filled(format!("{name}.gamma"), &[d], 1.0), beta: Param::zeros(format!("{name}.beta"), &[d]) }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, LayerNormCache) {
        let d = x.cols;
        let mut xhat = Mat::zeros(x.rows, d);
        let mut y = Mat::zeros(x.rows, d);
        let mut inv_std = vec![0.0; x.rows];
        for r in 0..x.rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f32>() / d as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
            let inv = 1.0 / sqrtf(var + EPS);
            inv_std[r] = inv;
            let xh = xhat.row_mut(r);
            for j in 0..d {
                xh[j] = (row[j] - mean) * inv;
            }
            let yr = &mut y.data[r * d..(r + 1) * d];
            for j in 0..d {
                yr[j] = xhat.data[r * d + j] * self.gamma.value[j] + self.beta.value[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Mat) -> Mat {
        let d = dy.cols;
        let mut dx = Mat::zeros(dy.rows, d);
        let mut dxhat = vec![0.0f32; d];
        for r in 0..dy.rows {
            let g = dy.row(r);
            let xh = cache.xhat.row(r);
            for j in 0..d {
                self.gamma.grad[j] += g[j] * xh[j];
                self.beta.grad[j] += g[j];
                dxhat[j] = g[j] * self.gamma.value[j];
            }
            let sum: f32 = dxhat.iter().sum();
            let sum_x: f32 = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum();
            let inv = cache.inv_std[r];
            let out = dx.row_mut(r);
            for j in 0..d {
                out[j] = inv * (dxhat[j] - (sum + xh[j] * sum_x) / d as f32);
            }
        }
        dx
    }
}

impl Module for LayerNorm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
