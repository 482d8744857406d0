use alloc::vec;
use alloc::vec::Vec;

use super::{Trainable, VideoEmbedding};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::nn::{relu_backward, relu_inplace, Linear, Mat, Module, Param};
use crate::rng;

/// Two affine layers with a ReLU between them and a terminal sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub fc1: Linear,
    pub fc2: Linear,
    trainable: bool,
}

#[derive(Debug)]
pub struct HeadForward {
    z: Mat,
    hidden: Mat,
    p_hat: f64,
}

impl ClassifierHead {
    pub fn new(width: usize, hidden: usize, seed: u64) -> Self {
        let mut r = rng::rng(seed);
        ClassifierHead {
            fc1: Linear::new("fc1", width, hidden, core::f32::consts::SQRT_2, &mut r),
            fc2: Linear::new("fc2", hidden, 1, 1.0, &mut r),
            trainable: true,
        }
    }

    /// Every parameter zero; predicts exactly 0.5.
    pub fn zeros(width: usize, hidden: usize) -> Self {
        ClassifierHead { fc1: Linear::zeros("fc1", width, hidden), fc2: Linear::zeros("fc2", hidden, 1), trainable: true }
    }

    pub fn width(&self) -> usize {
        self.fc1.d_in()
    }

    pub fn hidden(&self) -> usize {
        self.fc1.d_out()
    }

    fn run(&self, z: &VideoEmbedding) -> Result<HeadForward> {
        if z.width() != self.width() {
            return Err(Error::ShapeMismatch(alloc::format!("embedding width {} vs head width {}", z.width(), self.width())));
        }
        let zm = Mat::from_vec(1, z.width(), z.0.iter().map(|&v| v as f32).collect());
        let mut hidden = self.fc1.forward(&zm);
        relu_inplace(&mut hidden.data);
        let logit = self.fc2.forward(&hidden).data[0] as f64;
        Ok(HeadForward { z: zm, hidden, p_hat: sigmoid(logit) })
    }

    /// Viability estimate in (0, 1).
    pub fn predict_viability(&self, z: &VideoEmbedding) -> Result<f64> {
        self.run(z).map(|f| f.p_hat)
    }

    pub fn forward_train(&self, z: &VideoEmbedding) -> Result<(f64, HeadForward)> {
        let f = self.run(z)?;
        Ok((f.p_hat, f))
    }

    /// Accumulate gradients given dL/dp̂; returns dL/dz.
    pub fn backward(&mut self, fwd: &HeadForward, dp_hat: f64) -> Vec<f64> {
        let dlogit = dp_hat * fwd.p_hat * (1.0 - fwd.p_hat);
        let dout = Mat::from_vec(1, 1, vec![dlogit as f32]);
        let mut dh = self.fc2.backward(&fwd.hidden, &dout, true).expect("dx");
        relu_backward(&fwd.hidden.data, &mut dh.data);
        let dz = self.fc1.backward(&fwd.z, &dh, true).expect("dx");
        dz.data.iter().map(|&v| v as f64).collect()
    }
}

impl Trainable for ClassifierHead {
    fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }
    fn is_trainable(&self) -> bool {
        self.trainable
    }
}

impl Module for ClassifierHead {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.fc1.params();
        v.extend(self.fc2.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.fc1.params_mut();
        v.extend(self.fc2.params_mut());
        v
    }
}
