//! Thin wrappers around rustfft used by the Bloch transform and the
//! real-space discretization.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT plan pair of a fixed size. The forward transform is the
/// unnormalized DFT; the inverse divides by `n`, so `inverse(forward(x)) = x`.
pub(crate) struct FftPair {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.fwd.process(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inv.process(data);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Integer DFT bin frequencies in rustfft ordering: `0, 1, ..., n/2-1, -n/2, ..., -1`
/// (for odd `n`, `0, ..., (n-1)/2, -(n-1)/2, ..., -1`).
pub(crate) fn bin_frequencies(n: usize) -> Vec<i64> {
    let half = (n as i64 + 1) / 2; // first negative bin index
    (0..n as i64).map(|i| if i < half { i } else { i - n as i64 }).collect()
}

/// Wavenumbers `2 pi m / length` in DFT bin ordering.
pub(crate) fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    bin_frequencies(n)
        .into_iter()
        .map(|m| 2.0 * std::f64::consts::PI * m as f64 / length)
        .collect()
}
