//! Locally optimal block preconditioned conjugate gradients on H², for the
//! eigenvalues of a Hermitian H closest to zero.
//!
//! Each step minimizes ‖Hx‖ over span[X, W, P] using the Gram matrix
//! (HS)^H(HS), then rotates X by a Rayleigh–Ritz step with H itself to
//! recover signed eigenvalues and H-residuals.

use crate::error::{invalid, numerical, Result};
use crate::linalg::{combine, gram, herm_eig, hermitize, norm, project_out, svqb, Block};
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};

/// A Hermitian operator that can be applied to vectors.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Diagonal approximation of (H² + shift)⁻¹.
    fn preconditioner(&self) -> Vec<f64>;
    /// Unit vectors in the order they should seed the block.
    fn initial_order(&self) -> Vec<usize>;
    /// Upper bound on ‖H‖.
    fn norm_estimate(&self) -> f64;
}

#[derive(Clone, Debug)]
pub struct LobpcgOptions {
    /// Converged when ‖Hx − λx‖ ≤ tol·‖H‖.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        LobpcgOptions {
            tol: 1e-10,
            max_iter: 2000,
            guard: 4,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LobpcgResult {
    /// Ordered by |λ|.
    pub values: Vec<f64>,
    pub vectors: Block,
    pub residual: f64,
    pub iterations: usize,
    pub clustered: bool,
}

fn apply_block<O: HermitianOperator + ?Sized>(op: &O, b: &Block) -> Block {
    b.iter()
        .map(|x| {
            let mut y = vec![C64::new(0.0, 0.0); x.len()];
            op.apply(x, &mut y);
            y
        })
        .collect()
}

fn dense_fallback<O: HermitianOperator + ?Sized>(op: &O, count: usize) -> Result<LobpcgResult> {
    let n = op.dim();
    let mut h = Mat::<C64>::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut y = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0, 0.0);
        op.apply(&e, &mut y);
        for i in 0..n {
            h[(i, j)] = y[i];
        }
    }
    let (vals, vecs) = herm_eig(&hermitize(&h))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()));
    let pick = &idx[..count];
    let vectors: Block = pick.iter().map(|&j| (0..n).map(|i| vecs[(i, j)]).collect()).collect();
    let hv = apply_block(op, &vectors);
    let mut residual = 0.0f64;
    for (t, &j) in pick.iter().enumerate() {
        let r: Vec<C64> = hv[t].iter().zip(&vectors[t]).map(|(a, b)| a - b * vals[j]).collect();
        residual = residual.max(norm(&r));
    }
    let values: Vec<f64> = pick.iter().map(|&j| vals[j]).collect();
    let nrm = op.norm_estimate();
    Ok(LobpcgResult {
        clustered: is_clustered(&values, nrm),
        values,
        vectors,
        residual,
        iterations: 0,
    })
}

fn is_clustered(values: &[f64], nrm: f64) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| w[1] - w[0] < 1e-8 * nrm)
}

/// The `count` eigenpairs of smallest |λ|.
pub fn lobpcg_near_zero<O: HermitianOperator + ?Sized>(
    op: &O,
    count: usize,
    opts: &LobpcgOptions,
) -> Result<LobpcgResult> {
    let n = op.dim();
    if count == 0 || count > n {
        return invalid(format!("cannot compute {count} eigenpairs of a {n}-dimensional operator"));
    }
    let b = (count + opts.guard).min(n);
    if 4 * b >= n {
        return dense_fallback(op, count);
    }
    let nrm = op.norm_estimate().max(1e-300);
    let thresh = opts.tol * nrm;
    let t = op.preconditioner();
    let order = op.initial_order();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let amp = 1e-2 / (n as f64).sqrt();
    let mut x: Block = (0..b)
        .map(|j| {
            let mut v: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
                .collect();
            v[order[j]] += C64::new(1.0, 0.0);
            v
        })
        .collect();
    x = svqb(&x, 1e-14)?;
    if x.len() < b {
        return numerical("LOBPCG initial block is rank deficient");
    }
    let mut p: Block = Vec::new();
    let mut last_res = f64::INFINITY;
    for it in 0..opts.max_iter {
        // fresh products keep HX consistent with X
        let hx0 = apply_block(op, &x);
        // signed Rayleigh–Ritz with H inside span X
        let k = hermitize(&gram(&x, &hx0));
        let (vals, y) = herm_eig(&k)?;
        let mut perm: Vec<usize> = (0..b).collect();
        perm.sort_by(|&a, &c| vals[a].abs().total_cmp(&vals[c].abs()).then(a.cmp(&c)));
        let yp = Mat::from_fn(b, b, |i, j| y[(i, perm[j])]);
        let xr: Vec<&Vec<C64>> = x.iter().collect();
        let hxr: Vec<&Vec<C64>> = hx0.iter().collect();
        x = combine(&xr, &yp, 0..b);
        let hx = combine(&hxr, &yp, 0..b);
        let lam: Vec<f64> = perm.iter().map(|&j| vals[j]).collect();
        let res: Block = (0..b)
            .map(|j| hx[j].iter().zip(&x[j]).map(|(a, v)| a - v * lam[j]).collect())
            .collect();
        let rn: Vec<f64> = res.iter().map(|r| norm(r)).collect();
        last_res = rn[..count].iter().cloned().fold(0.0, f64::max);
        if last_res <= thresh {
            let values = lam[..count].to_vec();
            let mut cl = lam.clone();
            cl.truncate(count + 1);
            return Ok(LobpcgResult {
                clustered: is_clustered(&cl, nrm),
                values,
                vectors: x[..count].to_vec(),
                residual: last_res,
                iterations: it,
            });
        }
        // residual of H²: (H² − λ²)x = (H + λ)(Hx − λx)
        let active: Vec<usize> = (0..b).filter(|&j| rn[j] > thresh).collect();
        let act: Block = active.iter().map(|&j| res[j].clone()).collect();
        let hr = apply_block(op, &act);
        let mut w: Block = active
            .iter()
            .enumerate()
            .map(|(a, &j)| {
                hr[a]
                    .iter()
                    .zip(&res[j])
                    .zip(&t)
                    .map(|((h, r), d)| (h + r * lam[j]) * *d)
                    .collect()
            })
            .collect();
        w.append(&mut p);
        project_out(&x, &mut w);
        let mut basis = svqb(&w, 1e-14)?;
        project_out(&x, &mut basis);
        basis = svqb(&basis, 1e-14)?;
        if basis.is_empty() {
            break;
        }
        let hb = apply_block(op, &basis);
        let s: Vec<&Vec<C64>> = x.iter().chain(basis.iter()).collect();
        let hs: Vec<&Vec<C64>> = hx.iter().chain(hb.iter()).collect();
        let g = Mat::from_fn(hs.len(), hs.len(), |i, j| crate::linalg::dot(hs[i], hs[j]));
        let (_, c) = herm_eig(&hermitize(&g))?;
        let newx = combine(&s, &c, 0..b);
        let cb = Mat::from_fn(basis.len(), b, |i, j| c[(b + i, j)]);
        let br: Vec<&Vec<C64>> = basis.iter().collect();
        p = combine(&br, &cb, 0..b);
        x = svqb(&newx, 1e-14)?;
        if x.len() < b {
            return numerical("LOBPCG block collapsed during reorthonormalization");
        }
    }
    numerical(format!(
        "LOBPCG did not converge in {} iterations: residual {last_res:e} > {thresh:e}",
        opts.max_iter
    ))
}
