//! Thin rustfft wrapper carrying the 1/n normalization on the inverse.

use num_complex::Complex64;
use rustfft::Fft;
use rustfft::FftPlanner;
use std::sync::Arc;

pub(crate) struct FftPair {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            scale: 1.0 / n as f64,
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform normalized so forward followed by inverse is identity.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }
}
