//! Square 2D DFT on row-major buffers, built from rustfft row transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform of an `n x n` row-major buffer.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&*self.forward, data);
    }

    /// Inverse transform including the `1 / n^2` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&*self.inverse, data);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn apply(&self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }
}

fn transpose_in_place<T>(data: &mut [T], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed DFT frequency of index `r` in cycles per sample, in `[-1/2, 1/2)`.
pub fn frequency(r: usize, n: usize) -> f64 {
    let r = r as isize;
    let n_i = n as isize;
    let signed = if r < (n_i + 1) / 2 { r } else { r - n_i };
    signed as f64 / n as f64
}
