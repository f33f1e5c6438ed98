//! 2x2 complex matrices and the Pauli basis.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Row-major 2x2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    pub const SIGMA1: Mat2 = Mat2([[ZERO, ONE], [ONE, ZERO]]);
    pub const SIGMA2: Mat2 = Mat2([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]]);
    pub const SIGMA3: Mat2 = Mat2([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// σ·v = v₁σ₁ + v₂σ₂.
    pub fn sigma_dot(v: [f64; 2]) -> Self {
        Mat2([
            [ZERO, C64::new(v[0], -v[1])],
            [C64::new(v[0], v[1]), ZERO],
        ])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, o: &Mat2) -> Self {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }

    pub fn sub(&self, o: &Mat2) -> Self {
        self.add(&o.scale_re(-1.0))
    }

    pub fn mul(&self, o: &Mat2) -> Self {
        let (a, b) = (&self.0, &o.0);
        let mut r = [[ZERO; 2]; 2];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(r)
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]).scale(d.inv()))
    }

    /// Singular values, largest first. A unitary rotation reduces A to a
    /// triangle [[f, g], [0, h]] with |f|, |g|, |h| known, whose singular
    /// values follow from the cancellation-free triangular formula.
    pub fn singular_values(&self) -> [f64; 2] {
        let [[a, b], [c, d]] = self.0;
        let f = a.norm().hypot(c.norm());
        let (g, h) = if f == 0.0 {
            (b.norm().hypot(d.norm()), 0.0)
        } else {
            // rows of the rotation are (a*, c*)/f and (−c, a)/f
            let g = (a.conj() * b + c.conj() * d) / f;
            let h = (a * d - c * b) / f;
            (g.norm(), h.norm())
        };
        triangle_singular_values(f, g, h)
    }

    pub fn norm2(&self) -> f64 {
        self.singular_values()[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// (Tr σ₁A, Tr σ₂A, Tr σ₃A).
    pub fn pauli_traces(&self) -> [f64; 3] {
        [
            Mat2::SIGMA1.mul(self).trace().re,
            Mat2::SIGMA2.mul(self).trace().re,
            Mat2::SIGMA3.mul(self).trace().re,
        ]
    }

    pub fn to_rows(&self) -> [[[f64; 2]; 2]; 2] {
        let m = &self.0;
        let p = |z: C64| [z.re, z.im];
        [[p(m[0][0]), p(m[0][1])], [p(m[1][0]), p(m[1][1])]]
    }
}

/// Serializable view of a 2x2 complex matrix as `[[[re, im]; 2]; 2]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Mat2Json(pub [[[f64; 2]; 2]; 2]);

impl From<Mat2> for Mat2Json {
    fn from(m: Mat2) -> Self {
        Mat2Json(m.to_rows())
    }
}

/// Singular values of the real triangle [[f, g], [0, h]] with f, g, h ≥ 0,
/// accurate to high relative precision.
fn triangle_singular_values(f: f64, g: f64, h: f64) -> [f64; 2] {
    let (lo, hi) = (f.min(h), f.max(h));
    if lo == 0.0 {
        return [hi.hypot(g), 0.0];
    }
    let s = 1.0 + lo / hi;
    let t = (hi - lo) / hi;
    if g < hi {
        let u = (g / hi) * (g / hi);
        let c = 2.0 / ((s * s + u).sqrt() + (t * t + u).sqrt());
        [hi / c, lo * c]
    } else {
        let u = hi / g;
        if u == 0.0 {
            return [g, lo * hi / g];
        }
        let c = 1.0 / ((1.0 + (s * u) * (s * u)).sqrt() + (1.0 + (t * u) * (t * u)).sqrt());
        [g / (c + c), lo * c * u * 2.0]
    }
}
