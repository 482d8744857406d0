use alloc::vec;
use alloc::vec::Vec;

use super::Param;
use crate::math::sqrtf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    /// AdamW-style decay applied to the weights instead of the gradient.
    pub decoupled: bool,
}

impl AdamConfig {
    pub fn new(lr: f32, weight_decay: f32) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, decoupled: false }
    }
}

/// Adaptive-moment optimizer. State is allocated only for the parameters
/// handed to [`Adam::new`], in the same order `step` must receive them.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    t: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[&Param]) -> Self {
        Adam {
            cfg,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// Number of f32 optimizer-state elements held (first and second moments).
    pub fn state_len(&self) -> usize {
        self.m.iter().chain(&self.v).map(Vec::len).sum()
    }

    pub fn step(&mut self, params: Vec<&mut Param>) {
        assert_eq!(params.len(), self.m.len(), "optimizer/parameter list mismatch");
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - libm::powf(c.beta1, self.t as f32);
        let bc2 = 1.0 - libm::powf(c.beta2, self.t as f32);
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.len(), m.len());
            for i in 0..p.value.len() {
                let mut g = p.grad[i];
                if c.weight_decay != 0.0 && !c.decoupled {
                    g += c.weight_decay * p.value[i];
                }
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                if c.decoupled && c.weight_decay != 0.0 {
                    p.value[i] -= c.lr * c.weight_decay * p.value[i];
                }
                p.value[i] -= c.lr * mhat / (sqrtf(vhat) + c.eps);
            }
        }
    }
}
