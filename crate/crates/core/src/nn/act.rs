use crate::math::{erff, expf, sqrtf};

pub fn relu_inplace(x: &mut [f32]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Gradient through ReLU given its output.
pub fn relu_backward(out: &[f32], dy: &mut [f32]) {
    dy.iter_mut().zip(out).for_each(|(g, &y)| {
        if y <= 0.0 {
            *g = 0.0
        }
    });
}

/// Exact (erf) GELU.
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + erff(x * core::f32::consts::FRAC_1_SQRT_2))
}

/// d gelu / dx.
pub fn gelu_backward(x: f32) -> f32 {
    let cdf = 0.5 * (1.0 + erff(x * core::f32::consts::FRAC_1_SQRT_2));
    let pdf = expf(-0.5 * x * x) / sqrtf(2.0 * core::f32::consts::PI);
    cdf + x * pdf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_derivative_matches_differences() {
        for i in -40..=40 {
            let x = i as f32 * 0.1;
            let h = 1e-3f32;
            let num = (gelu(x + h) as f64 - gelu(x - h) as f64) / (2.0 * h as f64);
            assert!((num - gelu_backward(x) as f64).abs() < 2e-3, "x={x}");
        }
        assert_eq!(gelu(0.0), 0.0);
    }
}
