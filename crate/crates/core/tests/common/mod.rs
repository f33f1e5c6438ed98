//! Independent reference computations used by the integration tests.
//! None of these share code with the library.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
}

/// Trapezoid rule on [a, b], halving the step until two successive values
/// agree to `tol` relative. Spectrally accurate for the smooth, rapidly
/// decaying integrands used here.
pub fn adaptive_trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut n = 64usize;
    let mut h = (b - a) / n as f64;
    let mut sum = 0.5 * (f(a) + f(b)) + (1..n).map(|i| f(a + i as f64 * h)).sum::<f64>();
    let mut prev = sum * h;
    for _ in 0..20 {
        let mids: f64 = (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum();
        sum += mids;
        n *= 2;
        h /= 2.0;
        let cur = sum * h;
        if (cur - prev).abs() <= tol * cur.abs().max(f64::MIN_POSITIVE) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// K₀(x) = (1/2)∫₀^∞ e^{−x²/(4t)} e^{−t} dt/t, integrated in u = ln t.
pub fn k0_heat(x: f64) -> f64 {
    let q = x * x / 4.0;
    0.5 * adaptive_trapezoid(|u| (-q * (-u).exp() - u.exp()).exp(), -60.0, 6.0, 1e-15)
}

/// K₁(x) = −K₀'(x) = (1/2)∫₀^∞ (x/2t) e^{−x²/(4t)} e^{−t} dt/t.
pub fn k1_heat(x: f64) -> f64 {
    let q = x * x / 4.0;
    0.5 * adaptive_trapezoid(
        |u| 0.5 * x * (-u).exp() * (-q * (-u).exp() - u.exp()).exp(),
        -60.0,
        6.0,
        1e-15,
    )
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// ∫_disk e^{−2πi ξ·x} dx for the disk of radius r, by Gauss–Legendre in
/// the radius and the trapezoid rule in the angle.
pub fn disk_transform(r: f64, xi: [f64; 2]) -> C64 {
    let (gx, gw) = gauss_legendre(80);
    let nth = 256;
    let mut acc = C64::new(0.0, 0.0);
    for (s, ws) in gx.iter().zip(&gw) {
        let rho = 0.5 * r * (s + 1.0);
        let mut ring = C64::new(0.0, 0.0);
        for j in 0..nth {
            let th = 2.0 * PI * j as f64 / nth as f64;
            let ph = -2.0 * PI * rho * (xi[0] * th.cos() + xi[1] * th.sin());
            ring += C64::new(ph.cos(), ph.sin());
        }
        acc += ring * (2.0 * PI / nth as f64) * rho * ws * 0.5 * r;
    }
    acc
}

/// ∫_{[−a/2,a/2]²} e^{−2πi ξ·x} dx by tensor Gauss–Legendre.
pub fn square_transform(a: f64, xi: [f64; 2]) -> C64 {
    let (gx, gw) = gauss_legendre(96);
    let mut acc = C64::new(0.0, 0.0);
    for (x1, w1) in gx.iter().zip(&gw) {
        for (x2, w2) in gx.iter().zip(&gw) {
            let p = [0.5 * a * x1, 0.5 * a * x2];
            let ph = -2.0 * PI * (xi[0] * p[0] + xi[1] * p[1]);
            acc += C64::new(ph.cos(), ph.sin()) * (w1 * w2 * 0.25 * a * a);
        }
    }
    acc
}

/// Coefficients of the unit-coefficient annulus N − w ≤ |m| ≤ N + w,
/// by direct enumeration.
pub fn annulus_modes(n: i64, w: i64) -> BTreeMap<(i64, i64), C64> {
    let mut out = BTreeMap::new();
    for a in -(n + w)..=(n + w) {
        for b in -(n + w)..=(n + w) {
            let r = ((a * a + b * b) as f64).sqrt();
            if r >= (n - w) as f64 && r <= (n + w) as f64 {
                out.insert((a, b), C64::new(1.0, 0.0));
            }
        }
    }
    out
}

/// S(χ) by the literal double sum over all pairs of modes.
pub fn hyp1_brute(coeffs: &BTreeMap<(i64, i64), C64>) -> C64 {
    let get = |m: (i64, i64)| coeffs.get(&m).copied().unwrap_or(C64::new(0.0, 0.0));
    let mut s = C64::new(0.0, 0.0);
    for (&m, &cm) in coeffs {
        if m == (0, 0) {
            continue;
        }
        for (&mp, &cmp) in coeffs {
            if mp == (0, 0) {
                continue;
            }
            let d = get((m.0 - mp.0, m.1 - mp.1));
            if d == C64::new(0.0, 0.0) {
                continue;
            }
            let dot = (m.0 * mp.0 + m.1 * mp.1) as f64;
            let nm = (m.0 * m.0 + m.1 * m.1) as f64;
            let nmp = (mp.0 * mp.0 + mp.1 * mp.1) as f64;
            s += cm.conj() * cmp * d * (dot / (nm * nmp));
        }
    }
    s
}

/// Eigenvalues ±√(4π²|m − k|² + μ²) of the constant-mass fiber, ascending.
pub fn constant_mass_spectrum(cutoff: i64, k: [f64; 2], mass: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for a in -cutoff..=cutoff {
        for b in -cutoff..=cutoff {
            let e = (4.0 * PI * PI * ((a as f64 - k[0]).powi(2) + (b as f64 - k[1]).powi(2)) + mass * mass).sqrt();
            v.push(e);
            v.push(-e);
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

pub type CMat = Vec<Vec<C64>>;

pub fn cmat_zeros(r: usize, c: usize) -> CMat {
    vec![vec![C64::new(0.0, 0.0); c]; r]
}

pub fn cmat_mul(a: &CMat, b: &CMat) -> CMat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = cmat_zeros(n, m);
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..m {
                out[i][j] += x * b[l][j];
            }
        }
    }
    out
}

pub fn cmat_sub(a: &CMat, b: &CMat) -> CMat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

pub fn cmat_add(a: &CMat, b: &CMat) -> CMat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

/// Solves A X = B by Gaussian elimination with partial pivoting.
pub fn cmat_solve(a: &CMat, b: &CMat) -> CMat {
    let n = a.len();
    let m = b[0].len();
    let mut aa = a.clone();
    let mut bb = b.clone();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| aa[i][c].norm().total_cmp(&aa[j][c].norm())).unwrap();
        aa.swap(c, p);
        bb.swap(c, p);
        let piv = aa[c][c];
        for r in c + 1..n {
            let f = aa[r][c] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in c..n {
                let t = aa[c][j];
                aa[r][j] -= f * t;
            }
            for j in 0..m {
                let t = bb[c][j];
                bb[r][j] -= f * t;
            }
        }
    }
    let mut x = cmat_zeros(n, m);
    for c in (0..n).rev() {
        for j in 0..m {
            let mut s = bb[c][j];
            for l in c + 1..n {
                s -= aa[c][l] * x[l][j];
            }
            x[c][j] = s / aa[c][c];
        }
    }
    x
}

pub fn cmat_identity(n: usize) -> CMat {
    let mut a = cmat_zeros(n, n);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    a
}

/// Largest singular value by power iteration on AᴴA.
pub fn cmat_norm2(a: &CMat) -> f64 {
    let n = a[0].len();
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + 0.01 * i as f64, 0.3 - 0.002 * i as f64)).collect();
    let mut lam = 0.0;
    for _ in 0..2000 {
        let av: Vec<C64> = a.iter().map(|r| r.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let mut w = vec![C64::new(0.0, 0.0); n];
        for (i, r) in a.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                w[j] += x.conj() * av[i];
            }
        }
        let nw = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let new = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (new - lam).abs() <= 1e-14 * new {
            return new;
        }
        lam = new;
    }
    lam
}
