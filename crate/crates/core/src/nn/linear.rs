use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{gemm, Mat, Module, Param, View};
use crate::rng::Rng;

/// Affine map `y = x·Wᵀ + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(name: &str, d_in: usize, d_out: usize, gain: f32, rng: &mut Rng) -> Self {
        Linear {
            weight: Param::fan_in(format!("{name}.weight"), &[d_out, d_in], d_in, gain, rng),
            bias: Param::zeros(format!("{name}.bias"), &[d_out]),
        }
    }

    pub fn zeros(name: &str, d_in: usize, d_out: usize) -> Self {
        Linear {
            weight: Param::zeros(format!("{name}.weight"), &[d_out, d_in]),
            bias: Param::zeros(format!("{name}.bias"), &[d_out]),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        assert_eq!(x.cols, self.d_in(), "Linear input width");
        let (n, di, dout) = (x.rows, self.d_in(), self.d_out());
        let mut y = Mat::zeros(n, dout);
        for r in 0..n {
            y.row_mut(r).copy_from_slice(&self.bias.value);
        }
        gemm(n, di, dout, View::rows(&x.data, di), View::trans(&self.weight.value, di), 1.0, &mut y.data);
        y
    }

    /// Accumulates parameter gradients; returns dL/dx when `need_dx`.
    pub fn backward(&mut self, x: &Mat, dy: &Mat, need_dx: bool) -> Option<Mat> {
        let (n, di, dout) = (x.rows, self.d_in(), self.d_out());
        // dW[out,in] += dyᵀ[out,n] · x[n,in]
        gemm(dout, n, di, View::trans(&dy.data, dout), View::rows(&x.data, di), 1.0, &mut self.weight.grad);
        for r in 0..n {
            self.bias.grad.iter_mut().zip(dy.row(r)).for_each(|(g, d)| *g += d);
        }
        need_dx.then(|| {
            let mut dx = Mat::zeros(n, di);
            gemm(n, dout, di, View::rows(&dy.data, dout), View::rows(&self.weight.value, di), 0.0, &mut dx.data);
            dx
        })
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
