//! Square 2D FFTs on row-major buffers.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Smallest n' ≥ n whose prime factors are all in {2, 3, 5, 7}.
pub fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[derive(Clone)]
pub struct Fft2 {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({})", self.n)
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft2 { n, fwd, inv, scratch_len }
    }

    pub fn scratch(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.scratch_len.max(self.n * self.n)]
    }

    fn transpose(&self, data: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    /// Unnormalized forward transform; the result is left transposed,
    /// indexed `[k2][k1]`.
    pub fn forward_t(&self, data: &mut [C64], scratch: &mut [C64]) {
        self.fwd.process_with_scratch(data, &mut scratch[..self.scratch_len]);
        self.transpose(data);
        self.fwd.process_with_scratch(data, &mut scratch[..self.scratch_len]);
    }

    /// Unnormalized inverse of [`Fft2::forward_t`]: takes `[k2][k1]`
    /// and returns `[x1][x2]`.
    pub fn inverse_t(&self, data: &mut [C64], scratch: &mut [C64]) {
        self.inv.process_with_scratch(data, &mut scratch[..self.scratch_len]);
        self.transpose(data);
        self.inv.process_with_scratch(data, &mut scratch[..self.scratch_len]);
    }
}
