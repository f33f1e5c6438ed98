//! Plane-wave truncation of the Bloch fiber Hamiltonian
//!
//! h_k(α, β) = 2πσ·(m − k) δ_{mm'} + β χ̂_α(m − m') σ₃
//!
//! on the box |m|∞ ≤ M. Vectors are laid out as x[2i + s] with plane-wave
//! index i = (m₁ + M)(2M + 1) + (m₂ + M) and spin s ∈ {0, 1}.

pub mod lobpcg;
pub mod matfree;

use crate::error::{invalid, numerical, Result};
use crate::linalg::{herm_eig, jacobi_refine};
use crate::pauli::Mat2;
use crate::potential::{FourierTable, MassProfile};
use faer::Mat;
use lobpcg::{lobpcg_near_zero, HermitianOperator, LobpcgOptions};
use matfree::Convolver;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Default cap on the dense matrix, in MiB.
pub const DEFAULT_MEMORY_LIMIT_MB: f64 = 2048.0;

/// Index set |m|∞ ≤ M.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Basis {
    pub cutoff: usize,
}

impl Basis {
    pub fn new(cutoff: usize) -> Self {
        Basis { cutoff }
    }

    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Number of plane waves.
    pub fn waves(&self) -> usize {
        self.side() * self.side()
    }

    /// Dimension of the spinor space, 2·(2M + 1)².
    pub fn dim(&self) -> usize {
        2 * self.waves()
    }

    pub fn m(&self, i: usize) -> [i64; 2] {
        let s = self.side();
        let c = self.cutoff as i64;
        [(i / s) as i64 - c, (i % s) as i64 - c]
    }

    pub fn index(&self, m: [i64; 2]) -> Option<usize> {
        let c = self.cutoff as i64;
        if m[0].abs() > c || m[1].abs() > c {
            return None;
        }
        Some(((m[0] + c) as usize) * self.side() + (m[1] + c) as usize)
    }

    /// Plane-wave index of m = 0.
    pub fn zero(&self) -> usize {
        self.index([0, 0]).unwrap()
    }
}

/// Which solver a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dense,
    Iterative,
}

/// How a spectrum was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Dense,
    IterativeInterior,
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// max ‖Hv − λv‖ over the computed pairs.
    pub residual_bound: f64,
    pub method: SpectrumMethod,
    /// Two returned eigenvalues closer than 1e-8·‖H‖.
    pub clustered: bool,
    pub iterations: usize,
}

impl Spectrum {
    pub fn min_abs(&self) -> f64 {
        self.eigenvalues.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Fourier data and FFT plan for a fixed (profile, α, M), shared by all k.
#[derive(Clone, Debug)]
pub struct FiberContext {
    pub alpha: f64,
    pub basis: Basis,
    pub table: Arc<FourierTable>,
    conv: Arc<Convolver>,
    /// Bound on the sup norm of χ_α, used for ‖H‖ estimates.
    pub linf: f64,
}

impl FiberContext {
    pub fn new(profile: &MassProfile, alpha: f64, cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return invalid("cutoff M must be >= 1");
        }
        let table = Arc::new(FourierTable::build(profile, alpha, cutoff)?);
        Ok(Self::from_table(table, profile.linf_norm))
    }

    pub fn from_table(table: Arc<FourierTable>, linf: f64) -> Self {
        let t = table.clone();
        let conv = Arc::new(Convolver::new(table.cutoff, move |d| t.get(d)));
        FiberContext {
            alpha: table.alpha,
            basis: Basis::new(table.cutoff),
            table,
            conv,
            linf,
        }
    }

    /// Operator allowing negative β, for derivatives in β.
    pub fn operator_signed(&self, beta: f64, k: [f64; 2], dense: bool) -> Result<FiberOperator> {
        let mut op = self.operator(beta.abs(), k, false, 0.0)?;
        op.beta = beta;
        if dense {
            op.dense = Some(op.build_dense());
        }
        Ok(op)
    }

    /// Operator at (β, k); with `dense` the full matrix is assembled, subject
    /// to `memory_limit_mb`.
    pub fn operator(
        &self,
        beta: f64,
        k: [f64; 2],
        dense: bool,
        memory_limit_mb: f64,
    ) -> Result<FiberOperator> {
        check_k(k)?;
        if !(beta >= 0.0 && beta.is_finite()) {
            return invalid(format!("beta must be finite and >= 0, got {beta}"));
        }
        let mut op = FiberOperator {
            k,
            alpha: self.alpha,
            beta,
            basis: self.basis,
            table: self.table.clone(),
            conv: self.conv.clone(),
            linf: self.linf,
            dense: None,
        };
        if dense {
            let n = op.basis.dim() as f64;
            let need_mb = 16.0 * n * n / (1024.0 * 1024.0);
            if need_mb > memory_limit_mb {
                return invalid(format!(
                    "dense fiber matrix needs {need_mb:.0} MiB (n = {n}), above the limit of \
                     {memory_limit_mb:.0} MiB; use the iterative (matrix-free) solver"
                ));
            }
            op.dense = Some(op.build_dense());
        }
        Ok(op)
    }
}

fn check_k(k: [f64; 2]) -> Result<()> {
    if k.iter().any(|x| !(x.abs() <= 0.5)) {
        return invalid(format!("k must lie in the zone [-1/2, 1/2]^2, got {k:?}"));
    }
    Ok(())
}

/// Truncated h_k(α, β).
#[derive(Clone, Debug)]
pub struct FiberOperator {
    pub k: [f64; 2],
    pub alpha: f64,
    pub beta: f64,
    pub basis: Basis,
    pub table: Arc<FourierTable>,
    conv: Arc<Convolver>,
    linf: f64,
    dense: Option<Mat<C64>>,
}

/// Dense assembly of h_k(α, β) with the default memory limit.
pub fn assemble(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    k: [f64; 2],
    cutoff: usize,
) -> Result<FiberOperator> {
    FiberContext::new(profile, alpha, cutoff)?.operator(beta, k, true, DEFAULT_MEMORY_LIMIT_MB)
}

/// Matrix-free h_k(α, β).
pub fn assemble_matrix_free(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    k: [f64; 2],
    cutoff: usize,
) -> Result<FiberOperator> {
    FiberContext::new(profile, alpha, cutoff)?.operator(beta, k, false, 0.0)
}

impl FiberOperator {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn dense(&self) -> Option<&Mat<C64>> {
        self.dense.as_ref()
    }

    /// m − k for plane wave i.
    pub fn shifted(&self, i: usize) -> [f64; 2] {
        let m = self.basis.m(i);
        [m[0] as f64 - self.k[0], m[1] as f64 - self.k[1]]
    }

    /// The 2×2 block between plane waves i and j.
    pub fn block(&self, i: usize, j: usize) -> Mat2 {
        let (mi, mj) = (self.basis.m(i), self.basis.m(j));
        let mass = Mat2::SIGMA3.scale(self.table.get([mi[0] - mj[0], mi[1] - mj[1]]) * self.beta);
        if i == j {
            let v = self.shifted(i);
            Mat2::sigma_dot([2.0 * PI * v[0], 2.0 * PI * v[1]]).add(&mass)
        } else {
            mass
        }
    }

    fn build_dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut h = Mat::<C64>::zeros(n, n);
        for j in 0..self.basis.waves() {
            for i in 0..self.basis.waves() {
                let b = self.block(i, j);
                for s in 0..2 {
                    for t in 0..2 {
                        h[(2 * i + s, 2 * j + t)] = b.get(s, t);
                    }
                }
            }
        }
        h
    }

    /// Dense matrix, assembled on demand when the operator is matrix-free.
    pub fn to_dense(&self) -> Mat<C64> {
        self.dense.clone().unwrap_or_else(|| self.build_dense())
    }

    /// y = H x using the dense matrix.
    pub fn dense_apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let Some(h) = &self.dense else {
            return invalid("operator has no dense representation");
        };
        let n = self.dim();
        let mut y = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let xj = x[j];
            if xj == C64::new(0.0, 0.0) {
                continue;
            }
            let col = h.col(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
        Ok(y)
    }

    /// y = H x, matrix-free: kinetic part diagonal in m, mass part as an FFT
    /// convolution.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.kinetic_into(x, y);
        if self.beta != 0.0 {
            let b = C64::new(self.beta, 0.0);
            self.conv.apply_strided(x, y, 2, 0, b);
            self.conv.apply_strided(x, y, 2, 1, -b);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// y = 2πσ·(m − k) x, blockwise.
    pub fn kinetic_into(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.basis.waves() {
            let v = self.shifted(i);
            let (a, b) = (2.0 * PI * v[0], 2.0 * PI * v[1]);
            y[2 * i] = C64::new(a, -b) * x[2 * i + 1];
            y[2 * i + 1] = C64::new(a, b) * x[2 * i];
        }
    }

    /// Upper bound max 2π|m − k| + β·‖χ‖∞ on ‖H‖.
    pub fn norm_estimate(&self) -> f64 {
        let kin = (0..self.basis.waves())
            .map(|i| {
                let v = self.shifted(i);
                2.0 * PI * v[0].hypot(v[1])
            })
            .fold(0.0, f64::max);
        kin + self.beta * self.linf
    }

    /// Largest |χ̂_α(d)| over the stored differences, times β.
    fn mass_scale(&self) -> f64 {
        let s = self.table.span();
        let mut best = 0.0f64;
        for a in -s..=s {
            for b in -s..=s {
                best = best.max(self.table.get([a, b]).norm());
            }
        }
        self.beta * best
    }
}

impl HermitianOperator for FiberOperator {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.apply_into(x, y)
    }

    fn preconditioner(&self) -> Vec<f64> {
        let shift = PI * PI + self.mass_scale().powi(2);
        (0..self.dim())
            .map(|r| {
                let v = self.shifted(r / 2);
                1.0 / (4.0 * PI * PI * (v[0] * v[0] + v[1] * v[1]) + shift)
            })
            .collect()
    }

    fn initial_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        let d = |r: usize| {
            let v = self.shifted(r / 2);
            v[0] * v[0] + v[1] * v[1]
        };
        idx.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
        idx
    }

    fn norm_estimate(&self) -> f64 {
        FiberOperator::norm_estimate(self)
    }
}

fn max_residual(h: &Mat<C64>, vals: &[f64], vecs: &Mat<C64>) -> f64 {
    let hu = h * vecs;
    let mut worst = 0.0f64;
    for j in 0..vals.len() {
        let mut s = 0.0;
        for i in 0..h.nrows() {
            s += (hu[(i, j)] - vecs[(i, j)] * vals[j]).norm_sqr();
        }
        worst = worst.max(s.sqrt());
    }
    worst
}

/// Full spectrum and eigenvectors (columns) from the dense matrix.
pub fn eigenpairs_dense(op: &FiberOperator) -> Result<(Spectrum, Mat<C64>)> {
    let Some(h) = &op.dense else {
        return invalid("eigenvalues_dense needs the dense representation");
    };
    let norm = op.norm_estimate().max(1.0);
    let (mut vals, mut vecs) = herm_eig(h)?;
    let mut residual_bound = max_residual(h, &vals, &vecs);
    // faer occasionally returns a few inaccurate pairs on heavily
    // degenerate spectra; a Rayleigh–Ritz pass repairs them
    if residual_bound > 1e-10 * norm {
        let (v, u) = jacobi_refine(h, &vecs);
        let r = max_residual(h, &v, &u);
        if r < residual_bound {
            (vals, vecs, residual_bound) = (v, u, r);
        }
    }
    if residual_bound > 1e-10 * norm {
        return numerical(format!(
            "dense eigensolver residual {residual_bound:e} exceeds 1e-10·‖H‖ = {:e}",
            1e-10 * norm
        ));
    }
    let clustered = vals.windows(2).any(|w| w[1] - w[0] < 1e-8 * norm);
    Ok((
        Spectrum {
            eigenvalues: vals,
            residual_bound,
            method: SpectrumMethod::Dense,
            clustered,
            iterations: 0,
        },
        vecs,
    ))
}

/// Full ascending spectrum from the dense matrix.
pub fn eigenvalues_dense(op: &FiberOperator) -> Result<Spectrum> {
    eigenpairs_dense(op).map(|p| p.0)
}

/// The `count` eigenvalues of smallest |λ|, by LOBPCG on H² with the
/// matrix-free apply, returned in ascending order.
pub fn eigenvalues_near_zero(op: &FiberOperator, count: usize) -> Result<Spectrum> {
    eigenvalues_near_zero_with(op, count, &LobpcgOptions::default())
}

pub fn eigenvalues_near_zero_with(
    op: &FiberOperator,
    count: usize,
    opts: &LobpcgOptions,
) -> Result<Spectrum> {
    if count < 2 {
        return invalid("eigenvalues_near_zero needs count >= 2");
    }
    if count > op.dim() {
        return invalid(format!("count {count} exceeds the dimension {}", op.dim()));
    }
    let r = lobpcg_near_zero(op, count, opts)?;
    let mut vals = r.values;
    vals.sort_by(f64::total_cmp);
    Ok(Spectrum {
        eigenvalues: vals,
        residual_bound: r.residual,
        method: SpectrumMethod::IterativeInterior,
        clustered: r.clustered,
        iterations: r.iterations,
    })
}

/// min |λ| with the chosen solver.
pub fn min_abs_with(op: &FiberOperator, solver: SolverKind, opts: &LobpcgOptions) -> Result<Spectrum> {
    match solver {
        SolverKind::Dense => eigenvalues_dense(op),
        SolverKind::Iterative => eigenvalues_near_zero_with(op, 2, opts),
    }
}
