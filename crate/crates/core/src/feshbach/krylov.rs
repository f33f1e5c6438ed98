//! Restarted GMRES and a Lanczos estimate of the top eigenvalue.

use crate::error::{numerical, Result};
use crate::linalg::{axpy, dot, herm_eig, norm};
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, Debug)]
pub struct GmresInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    if a.norm() == 0.0 {
        return (0.0, C64::new(1.0, 0.0), b);
    }
    let t = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let ph = a / a.norm();
    (a.norm() / t, ph * b.conj() / t, ph * t)
}

/// Solves A x = b by GMRES(restart) to relative residual `tol`.
pub fn gmres(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<C64>, GmresInfo)> {
    let n = b.len();
    let bn = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if bn == 0.0 {
        return Ok((x, GmresInfo { iterations: 0, relative_residual: 0.0 }));
    }
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let beta = norm(&r);
        rel = beta / bn;
        if rel <= tol {
            break;
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h: Vec<Vec<C64>> = Vec::new();
        let mut rot: Vec<(f64, C64)> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        let mut steps = 0;
        for j in 0..restart {
            let mut w = apply(&v[j]);
            let mut col = vec![C64::new(0.0, 0.0); j + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(vi, &w);
                    col[i] += c;
                    axpy(-c, vi, &mut w);
                }
            }
            let wn = norm(&w);
            col[j + 1] = C64::new(wn, 0.0);
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a0, a1) = (col[i], col[i + 1]);
                col[i] = a0 * c + s * a1;
                col[i + 1] = -s.conj() * a0 + a1 * c;
            }
            let (c, s, rr) = givens(col[j], col[j + 1]);
            col[j] = rr;
            col[j + 1] = C64::new(0.0, 0.0);
            rot.push((c, s));
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            h.push(col);
            steps = j + 1;
            total += 1;
            rel = g[j + 1].norm() / bn;
            if rel <= tol || wn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|z| z / wn).collect());
        }
        // back substitution on the triangular factor
        let mut y = vec![C64::new(0.0, 0.0); steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for k in (i + 1)..steps {
                s -= h[k][i] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &v[i], &mut x);
        }
        if rel <= tol {
            let ax = apply(&x);
            let r: Vec<C64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
            rel = norm(&r) / bn;
            if rel <= tol * 10.0 {
                return Ok((x, GmresInfo { iterations: total, relative_residual: rel }));
            }
        }
    }
    if rel <= tol * 10.0 {
        return Ok((x, GmresInfo { iterations: total, relative_residual: rel }));
    }
    numerical(format!("GMRES stalled after {total} iterations at relative residual {rel:e}"))
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator by
/// Lanczos with full reorthogonalization.
pub fn lanczos_max(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    n: usize,
    seed: u64,
    max_steps: usize,
    tol: f64,
) -> Result<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let qn = norm(&q);
    q.iter_mut().for_each(|z| *z /= qn);
    let mut basis: Vec<Vec<C64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev = f64::NAN;
    let steps = max_steps.min(n).max(1);
    for j in 0..steps {
        let mut w = apply(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |r, c| {
            if r == c {
                C64::new(alpha[r], 0.0)
            } else if r == c + 1 {
                C64::new(betas[c], 0.0)
            } else if c == r + 1 {
                C64::new(betas[r], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let (vals, _) = herm_eig(&t)?;
        let top = *vals.last().unwrap();
        if (top - prev).abs() <= tol * top.abs() && j >= 4 {
            return Ok(top);
        }
        prev = top;
        if b <= 1e-14 * top.abs().max(f64::MIN_POSITIVE) {
            return Ok(top);
        }
        betas.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    Ok(prev)
}
