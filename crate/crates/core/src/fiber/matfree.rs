//! Matrix-free convolution with a coefficient table via zero-padded FFTs.

use crate::fft2::{next_smooth, Fft2};
use num_complex::Complex64 as C64;

/// Applies x ↦ (Σ_{m'} c(m − m') x(m'))_m on the plane-wave box |m|∞ ≤ M.
///
/// The box is embedded in an N×N periodic grid with N ≥ 4M + 2, so the
/// circular convolution sees every difference |d|∞ ≤ 2M exactly once.
#[derive(Clone, Debug)]
pub struct Convolver {
    pub cutoff: usize,
    pub grid: usize,
    fft: Fft2,
    kernel: Vec<C64>,
}

impl Convolver {
    pub fn new(cutoff: usize, coeff: impl Fn([i64; 2]) -> C64) -> Self {
        let n = next_smooth(4 * cutoff + 2);
        let fft = Fft2::new(n);
        let span = 2 * cutoff as i64;
        let mut kernel = vec![C64::new(0.0, 0.0); n * n];
        let wrap = |d: i64| d.rem_euclid(n as i64) as usize;
        for d1 in -span..=span {
            for d2 in -span..=span {
                kernel[wrap(d1) * n + wrap(d2)] = coeff([d1, d2]);
            }
        }
        let mut scratch = fft.scratch();
        fft.forward_t(&mut kernel, &mut scratch);
        let s = 1.0 / (n * n) as f64;
        kernel.iter_mut().for_each(|z| *z *= s);
        Convolver { cutoff, grid: n, fft, kernel }
    }

    /// Number of plane waves in the box.
    pub fn len(&self) -> usize {
        (2 * self.cutoff + 1).pow(2)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Convolution of the plane-wave vector read from `x[offset + stride·i]`,
    /// added times `scale` into `y[offset + stride·i]`.
    pub fn apply_strided(&self, x: &[C64], y: &mut [C64], stride: usize, offset: usize, scale: C64) {
        let n = self.grid;
        let side = 2 * self.cutoff + 1;
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        for a in 0..side {
            for b in 0..side {
                buf[a * n + b] = x[offset + stride * (a * side + b)];
            }
        }
        let mut scratch = self.fft.scratch();
        self.fft.forward_t(&mut buf, &mut scratch);
        for (z, k) in buf.iter_mut().zip(&self.kernel) {
            *z *= k;
        }
        self.fft.inverse_t(&mut buf, &mut scratch);
        for a in 0..side {
            for b in 0..side {
                y[offset + stride * (a * side + b)] += scale * buf[a * n + b];
            }
        }
    }

    /// Plain convolution on an unstrided plane-wave vector.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_strided(x, &mut y, 1, 0, C64::new(1.0, 0.0));
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_convolution() {
        let m = 3usize;
        let side = 2 * m + 1;
        let c = |d: [i64; 2]| C64::new(1.0 / (1.0 + (d[0] * d[0] + 2 * d[1] * d[1]) as f64), 0.1 * d[0] as f64);
        let conv = Convolver::new(m, c);
        let x: Vec<C64> = (0..side * side)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let y = conv.apply(&x);
        let mi = m as i64;
        for a in 0..side {
            for b in 0..side {
                let mut s = C64::new(0.0, 0.0);
                for a2 in 0..side {
                    for b2 in 0..side {
                        let d = [a as i64 - a2 as i64, b as i64 - b2 as i64];
                        s += c(d) * x[a2 * side + b2];
                    }
                }
                assert!((s - y[a * side + b]).norm() < 1e-12, "{a} {b} {mi}");
            }
        }
    }
}
