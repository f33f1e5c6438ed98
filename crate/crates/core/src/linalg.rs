//! Thin helpers over faer and over column-block storage.

use crate::error::{numerical, Result};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;

pub type Block = Vec<Vec<C64>>;

/// Eigen-decomposition of a Hermitian matrix (lower triangle read),
/// eigenvalues ascending.
pub fn herm_eig(a: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| crate::Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let s = e.S().column_vector();
    let vals: Vec<f64> = (0..a.nrows()).map(|i| s[i].re).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return numerical("Hermitian eigensolver returned non-finite eigenvalues");
    }
    Ok((vals, e.U().to_owned()))
}

/// Improves an approximate eigendecomposition of a Hermitian `h` by a
/// Rayleigh–Ritz step: C = UᴴHU is diagonalized with cyclic Jacobi
/// rotations (cheap, since C is already nearly diagonal) and U is rotated
/// along. Returns ascending eigenvalues.
pub fn jacobi_refine(h: &Mat<C64>, vecs: &Mat<C64>) -> (Vec<f64>, Mat<C64>) {
    let n = h.nrows();
    let hu = h * vecs;
    let mut c = vecs.adjoint() * &hu;
    let mut u = vecs.to_owned();
    let scale = (0..n).map(|i| c[(i, i)].re.abs()).fold(1.0, f64::max);
    for _sweep in 0..30 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let cpq = c[(p, q)];
                let r = cpq.norm();
                if r <= 1e-17 * scale {
                    continue;
                }
                rotated = true;
                let ph = cpq / r;
                let tau = (c[(q, q)].re - c[(p, p)].re) / (2.0 * r);
                let t = if tau >= 0.0 { 1.0 } else { -1.0 } / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // V = [[cs, sn], [−sn·conj(ph), cs·conj(ph)]] on (p, q)
                let (vqp, vqq) = (-ph.conj() * sn, ph.conj() * cs);
                for m in [&mut c, &mut u] {
                    for l in 0..n {
                        let (a, b) = (m[(l, p)], m[(l, q)]);
                        m[(l, p)] = a * cs + b * vqp;
                        m[(l, q)] = a * sn + b * vqq;
                    }
                }
                for l in 0..n {
                    let (a, b) = (c[(p, l)], c[(q, l)]);
                    c[(p, l)] = a * cs + b * vqp.conj();
                    c[(q, l)] = a * sn + b * vqq.conj();
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| c[(a, a)].re.total_cmp(&c[(b, b)].re));
    let vals = idx.iter().map(|&j| c[(j, j)].re).collect();
    let vecs = Mat::from_fn(n, n, |i, j| u[(i, idx[j])]);
    (vals, vecs)
}

pub fn herm_eigvals(a: &Mat<C64>) -> Result<Vec<f64>> {
    let s = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| crate::Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let mut v: Vec<f64> = s.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Singular values, descending.
pub fn singular_values(a: &Mat<C64>) -> Result<Vec<f64>> {
    let s = a
        .singular_values()
        .map_err(|e| crate::Error::Numerical(format!("SVD failed: {e:?}")))?;
    Ok(s)
}

#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// y += s·x
#[inline]
pub fn axpy(s: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Gram matrix A^H B of two column blocks.
pub fn gram(a: &Block, b: &Block) -> Mat<C64> {
    Mat::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]))
}

/// Columns Σ_i S_i·C[i, j] for j in `cols`.
pub fn combine(s: &[&Vec<C64>], c: &Mat<C64>, cols: std::ops::Range<usize>) -> Block {
    let n = s.first().map(|v| v.len()).unwrap_or(0);
    cols.map(|j| {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, si) in s.iter().enumerate() {
            axpy(c[(i, j)], si, &mut out);
        }
        out
    })
    .collect()
}

/// Hermitian part (A + A^H)/2.
pub fn hermitize(a: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Orthonormalizes `b` against itself by symmetric (SVQB) orthogonalization,
/// dropping directions whose relative Gram eigenvalue falls below `drop`.
pub fn svqb(b: &Block, drop: f64) -> Result<Block> {
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let norms: Vec<f64> = b.iter().map(|v| norm(v)).collect();
    let keep: Vec<usize> = (0..b.len()).filter(|&i| norms[i] > 0.0).collect();
    if keep.is_empty() {
        return Ok(Vec::new());
    }
    let scaled: Block = keep
        .iter()
        .map(|&i| b[i].iter().map(|x| x / norms[i]).collect())
        .collect();
    let g = hermitize(&gram(&scaled, &scaled));
    let (vals, vecs) = herm_eig(&g)?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let refs: Vec<&Vec<C64>> = scaled.iter().collect();
    let mut out = Vec::new();
    for (j, &l) in vals.iter().enumerate().rev() {
        if l > drop * top && l > 0.0 {
            let mut v = combine(&refs, &vecs, j..j + 1).pop().unwrap();
            let s = 1.0 / l.sqrt();
            v.iter_mut().for_each(|x| *x *= s);
            out.push(v);
        }
    }
    Ok(out)
}

/// Removes from each column of `b` its components along the orthonormal block `q`.
pub fn project_out(q: &Block, b: &mut Block) {
    for v in b.iter_mut() {
        for qi in q {
            let c = dot(qi, v);
            axpy(-c, qi, v);
        }
    }
}

/// Matrix 2-norm of the difference between two dense matrices.
pub fn diff_norm2(a: &Mat<C64>, b: &Mat<C64>) -> Result<f64> {
    let d = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    Ok(singular_values(&d)?.first().copied().unwrap_or(0.0))
}
