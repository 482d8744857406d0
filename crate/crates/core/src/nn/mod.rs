//! Dense layers with explicit forward/backward passes.
//!
//! Layers never hold activations. `forward` returns whatever the matching
//! `backward` needs, and `backward` accumulates parameter gradients into
//! [`Param::grad`] and returns the gradient with respect to its input.
//! Activations are row-major `f32`; image tensors are NHWC.

mod act;
mod adam;
mod attention;
mod conv;
mod linear;
mod norm;
mod transformer;

pub use act::{gelu, gelu_backward, relu_backward, relu_inplace};
pub use adam::{Adam, AdamConfig};
pub use attention::{AttentionCache, MultiHeadAttention};
pub use conv::{Conv2d, ConvCache, Image};
pub use linear::Linear;
pub use norm::{LayerNorm, LayerNormCache};
pub use transformer::{BlockCache, TransformerBlock};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::rng::Rng;

/// A named trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param { name: name.into(), shape: shape.to_vec(), value: vec![0.0; n], grad: vec![0.0; n] }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], v: f32) -> Self {
        let mut p = Self::zeros(name, shape);
        p.value.iter_mut().for_each(|x| *x = v);
        p
    }

    /// Uniform in ±gain·sqrt(3/fan_in), i.e. standard deviation gain/sqrt(fan_in).
    pub fn fan_in(name: impl Into<String>, shape: &[usize], fan_in: usize, gain: f32, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(name, shape);
        let bound = gain * crate::math::sqrtf(3.0 / fan_in.max(1) as f32);
        p.value.iter_mut().for_each(|x| *x = rng.random_range(-bound..=bound));
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Anything owning parameters. Visiting order is fixed and defines the
/// serialization order in checkpoints.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    fn scale_grad(&mut self, s: f32) {
        for p in self.params_mut() {
            p.grad.iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// Row-major matrix of activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * cols, data.len(), "Mat::from_vec shape");
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }
}

/// Strided matrix operand: element (i, j) lives at `off + i*rs + j*cs`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f32],
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn rows(data: &'a [f32], cols: usize) -> Self {
        View { data, off: 0, rs: cols, cs: 1 }
    }

    /// The transpose of a row-major `rows x cols` buffer.
    pub fn trans(data: &'a [f32], cols: usize) -> Self {
        View { data, off: 0, rs: 1, cs: cols }
    }

    fn check(&self, r: usize, c: usize) {
        if r > 0 && c > 0 {
            let last = self.off + (r - 1) * self.rs + (c - 1) * self.cs;
            assert!(last < self.data.len(), "gemm operand out of bounds");
        }
    }
}

/// `c = a·b + beta·c` where `a` is m×k, `b` is k×n and `c` is the strided
/// m×n output starting at `c_off` with row stride `c_rs`.
pub(crate) fn gemm_into(
    m: usize,
    k: usize,
    n: usize,
    a: View<'_>,
    b: View<'_>,
    beta: f32,
    c: &mut [f32],
    c_off: usize,
    c_rs: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    a.check(m, k);
    b.check(k, n);
    assert!(c_off + (m - 1) * c_rs + n <= c.len(), "gemm output out of bounds");
    if k == 0 {
        for i in 0..m {
            c[c_off + i * c_rs..c_off + i * c_rs + n].iter_mut().for_each(|x| *x *= beta);
        }
        return;
    }
    // SAFETY: all index ranges were bounds-checked above, the output slice is
    // uniquely borrowed and does not alias the inputs.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr().add(a.off),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.off),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr().add(c_off),
            c_rs as isize,
            1,
        );
    }
}

/// Dense `c = a·b + beta·c` over contiguous row-major buffers.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: View<'_>, b: View<'_>, beta: f32, c: &mut [f32]) {
    gemm_into(m, k, n, a, b, beta, c, 0, n);
}
