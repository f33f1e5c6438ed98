//! Schur complement of h_k − z with respect to the zero Fourier mode,
//!
//! F_k(z) = A − C^H D⁻¹ C, A = P₀(h − z)P₀, C = Q₀hP₀, D = Q₀(h − z)Q₀,
//!
//! together with the effective matrix m_k(β), the scalar w(β) and the
//! norm diagnostics built from the factorization βχσ₃ = U·W.

pub mod krylov;

use crate::error::{invalid, numerical, Result};
use crate::fiber::lobpcg::{lobpcg_near_zero, HermitianOperator, LobpcgOptions};
use crate::fiber::matfree::Convolver;
use crate::fiber::{FiberContext, FiberOperator, DEFAULT_MEMORY_LIMIT_MB};
use crate::linalg::{dot, herm_eigvals, Block};
use crate::pauli::{Mat2, Mat2Json};
use crate::potential::{hyp1_sum, FourierTable, MassProfile};
use faer::linalg::solvers::Solve;
use faer::Mat;
use krylov::{gmres, lanczos_max};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

/// Operators up to this dimension are handled with dense factorizations.
pub const DENSE_MAX_DIM: usize = 1300;

const GMRES_TOL: f64 = 1e-14;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Operator for h_k(α, β) in the representation the Schur routines prefer.
pub fn feshbach_operator(ctx: &FiberContext, beta: f64, k: [f64; 2]) -> Result<FiberOperator> {
    ctx.operator(beta, k, ctx.basis.dim() <= DENSE_MAX_DIM, DEFAULT_MEMORY_LIMIT_MB)
}

fn in_p0(op: &FiberOperator, row: usize) -> bool {
    row / 2 == op.basis.zero()
}

fn q_rows(op: &FiberOperator) -> Vec<usize> {
    (0..op.dim()).filter(|&r| !in_p0(op, r)).collect()
}

/// P₀ block of h_k: −2πσ·k + βχ̂_α(0)σ₃.
pub fn p0_block(op: &FiberOperator) -> Mat2 {
    let z = op.basis.zero();
    op.block(z, z)
}

/// Columns Q₀ h P₀ e_t, t = 0, 1, as full-length vectors.
pub fn coupling_columns(op: &FiberOperator) -> Block {
    let z = op.basis.zero();
    (0..2)
        .map(|t| {
            let mut c = vec![zero(); op.dim()];
            for i in 0..op.basis.waves() {
                if i == z {
                    continue;
                }
                let b = op.block(i, z);
                c[2 * i] = b.get(0, t);
                c[2 * i + 1] = b.get(1, t);
            }
            c
        })
        .collect()
}

/// Columns Q₀ χ_α P₀ e_t (no β, no σ₃).
pub fn chi_columns(op: &FiberOperator) -> Block {
    let z = op.basis.zero();
    (0..2)
        .map(|t| {
            let mut c = vec![zero(); op.dim()];
            for i in 0..op.basis.waves() {
                if i != z {
                    c[2 * i + t] = op.table.get(op.basis.m(i));
                }
            }
            c
        })
        .collect()
}

/// x ↦ (2πσ·(m − k) − z)⁻¹ x on every m ≠ 0, zero on P₀.
pub fn kinetic_inverse(op: &FiberOperator, z: f64, x: &[C64]) -> Vec<C64> {
    let mut y = vec![zero(); x.len()];
    let z0 = op.basis.zero();
    for i in 0..op.basis.waves() {
        if i == z0 {
            continue;
        }
        let v = op.shifted(i);
        let (a, b) = (2.0 * PI * v[0], 2.0 * PI * v[1]);
        let den = a * a + b * b - z * z;
        // (σ·u − z)⁻¹ = (σ·u + z)/(|u|² − z²)
        y[2 * i] = (x[2 * i] * z + C64::new(a, -b) * x[2 * i + 1]) / den;
        y[2 * i + 1] = (C64::new(a, b) * x[2 * i] + x[2 * i + 1] * z) / den;
    }
    y
}

/// D = Q₀(h − z)Q₀ on full-length vectors; the P₀ rows carry `pad`·I so
/// that they stay far from the low spectrum.
pub struct Q0Block<'a> {
    pub op: &'a FiberOperator,
    pub z: f64,
    pad: f64,
}

impl<'a> Q0Block<'a> {
    pub fn new(op: &'a FiberOperator, z: f64) -> Self {
        Q0Block {
            op,
            z,
            pad: op.norm_estimate() + z.abs() + 1.0,
        }
    }

    fn apply_q(&self, x: &[C64]) -> Vec<C64> {
        let zi = self.op.basis.zero();
        let mut xq = x.to_vec();
        xq[2 * zi] = zero();
        xq[2 * zi + 1] = zero();
        let mut y = self.op.apply(&xq);
        for (yi, xi) in y.iter_mut().zip(&xq) {
            *yi -= xi * self.z;
        }
        y[2 * zi] = zero();
        y[2 * zi + 1] = zero();
        y
    }
}

impl HermitianOperator for Q0Block<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let r = self.apply_q(x);
        y.copy_from_slice(&r);
        let zi = self.op.basis.zero();
        y[2 * zi] = x[2 * zi] * self.pad;
        y[2 * zi + 1] = x[2 * zi + 1] * self.pad;
    }

    fn preconditioner(&self) -> Vec<f64> {
        HermitianOperator::preconditioner(self.op)
    }

    fn initial_order(&self) -> Vec<usize> {
        let mut o = HermitianOperator::initial_order(self.op);
        o.retain(|&r| !in_p0(self.op, r));
        let zi = self.op.basis.zero();
        o.extend([2 * zi, 2 * zi + 1]);
        o
    }

    fn norm_estimate(&self) -> f64 {
        self.pad
    }
}

fn dense_q0(op: &FiberOperator, z: f64) -> Option<(Mat<C64>, Vec<usize>)> {
    let h = op.dense()?;
    let q = q_rows(op);
    let d = Mat::from_fn(q.len(), q.len(), |i, j| {
        let v = h[(q[i], q[j])];
        if i == j {
            v - z
        } else {
            v
        }
    });
    Some((d, q))
}

/// Solves D y = c for each column c (P₀ entries of c are ignored).
pub fn solve_q0(op: &FiberOperator, z: f64, rhs: &Block) -> Result<Block> {
    if let Some((d, q)) = dense_q0(op, z) {
        let b = Mat::from_fn(q.len(), rhs.len(), |i, j| rhs[j][q[i]]);
        let y = d.partial_piv_lu().solve(&b);
        return rhs
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let mut v = vec![zero(); op.dim()];
                for (i, &r) in q.iter().enumerate() {
                    v[r] = y[(i, j)];
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return numerical(format!("Q0 block of h - z is singular at z = {z}"));
                }
                Ok(v)
            })
            .collect();
    }
    let blk = Q0Block::new(op, z);
    // right preconditioning with the exact inverse of the kinetic Q₀ block
    let a = |u: &[C64]| blk.apply_q(&kinetic_inverse(op, z, u));
    rhs.iter()
        .map(|c| {
            let mut cq = c.clone();
            let zi = op.basis.zero();
            cq[2 * zi] = zero();
            cq[2 * zi + 1] = zero();
            let (u, _) = gmres(&a, &cq, GMRES_TOL, 80, 4000).map_err(|e| {
                crate::Error::Numerical(format!("Q0 solve at z = {z}: {e}"))
            })?;
            Ok(kinetic_inverse(op, z, &u))
        })
        .collect()
}

fn quad(a: &Block, b: &Block) -> Mat2 {
    Mat2::new(dot(&a[0], &b[0]), dot(&a[0], &b[1]), dot(&a[1], &b[0]), dot(&a[1], &b[1]))
}

/// C^H D⁻¹ C, the correction subtracted from the P₀ block.
pub fn coupling_term(op: &FiberOperator, z: f64) -> Result<Mat2> {
    if op.beta == 0.0 {
        return Ok(Mat2::ZERO);
    }
    let c = coupling_columns(op);
    let y = solve_q0(op, z, &c)?;
    Ok(quad(&c, &y))
}

/// F_k(z) without the invertibility diagnostics.
pub fn schur_matrix(op: &FiberOperator, z: f64) -> Result<Mat2> {
    let a = p0_block(op).sub(&Mat2::IDENTITY.scale_re(z));
    Ok(a.sub(&coupling_term(op, z)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurResult {
    #[serde(skip)]
    pub f: Mat2,
    pub q0_sigma_min: f64,
    pub q0_cond: f64,
}

/// Smallest singular value of D = Q₀(h − z)Q₀.
pub fn q0_smallest_singular(op: &FiberOperator, z: f64) -> Result<f64> {
    q0_extremes(op, z).map(|p| p.0)
}

fn q0_extremes(op: &FiberOperator, z: f64) -> Result<(f64, f64)> {
    if let Some((d, _)) = dense_q0(op, z) {
        let ev = herm_eigvals(&d)?;
        let lo = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let hi = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
        return Ok((lo, hi));
    }
    let blk = Q0Block::new(op, z);
    // the lowest Q₀ levels come in clusters of up to 8, so the block must
    // span a whole cluster
    let opts = LobpcgOptions {
        guard: 12,
        ..LobpcgOptions::default()
    };
    let r = lobpcg_near_zero(&blk, 2, &opts)?;
    let lo = r.values.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    Ok((lo, op.norm_estimate() + z.abs()))
}

/// F_k(z) with the smallest singular value and condition number of the Q₀
/// block; fails when that block is numerically singular.
pub fn schur_complement(op: &FiberOperator, z: f64) -> Result<SchurResult> {
    let (lo, hi) = q0_extremes(op, z)?;
    let scale = op.norm_estimate().max(1.0);
    if lo < 1e-10 * scale {
        return numerical(format!(
            "Q0 block of h_k - z is singular at z = {z} (smallest singular value {lo:e})"
        ));
    }
    Ok(SchurResult {
        f: schur_matrix(op, z)?,
        q0_sigma_min: lo,
        q0_cond: hi / lo,
    })
}

fn require_mean_zero(profile: &MassProfile) -> Result<()> {
    if profile.phi.abs() > 1e-12 * profile.l2_norm.max(1.0) {
        return invalid(format!("this diagnostic needs a mean-zero profile, got Phi = {}", profile.phi));
    }
    Ok(())
}

/// m_k(β) = −2πσ·k − β²σ₃ P₀χQ₀(Q₀h₀(1,β)Q₀)⁻¹Q₀χP₀σ₃ and its Pauli
/// traces (Tr σ₁m, Tr σ₂m, Tr σ₃m).
pub fn m_matrix(profile: &MassProfile, beta: f64, k: [f64; 2], cutoff: usize) -> Result<(Mat2, [f64; 3])> {
    let ctx = FiberContext::new(profile, 1.0, cutoff)?;
    m_matrix_in(&ctx, beta, k)
}

pub fn m_matrix_in(ctx: &FiberContext, beta: f64, k: [f64; 2]) -> Result<(Mat2, [f64; 3])> {
    let op0 = feshbach_operator(ctx, beta, [0.0, 0.0])?;
    if ctx.alpha != 1.0 {
        return invalid("m_k(beta) is defined at alpha = 1");
    }
    let lo = q0_smallest_singular(&op0, 0.0)?;
    if lo < 1e-10 * op0.norm_estimate().max(1.0) {
        return numerical("Q0 block of h_0(1, beta) is singular");
    }
    let g = coupling_term(&op0, 0.0)?;
    let m = Mat2::sigma_dot([-2.0 * PI * k[0], -2.0 * PI * k[1]]).sub(&g);
    let w = m.pauli_traces();
    Ok((m, w))
}

/// w(β) = Tr(P₀χQ₀(Q₀h₀(1,β)Q₀)⁻¹Q₀χP₀σ₃); β may be negative here.
pub fn w_value(ctx: &FiberContext, beta: f64) -> Result<f64> {
    if ctx.alpha != 1.0 {
        return invalid("w(beta) is defined at alpha = 1");
    }
    let op0 = ctx.operator_signed(beta, [0.0, 0.0], ctx.basis.dim() <= DENSE_MAX_DIM)?;
    let c = chi_columns(&op0);
    let y = solve_q0(&op0, 0.0, &c)?;
    let k = quad(&c, &y);
    Ok(k.mul(&Mat2::SIGMA3).trace().re)
}

#[derive(Clone, Debug, Serialize)]
pub struct WPrimeReport {
    pub s_chi: f64,
    /// −S/(4π²), the closed form as written.
    pub triple_sum_value: f64,
    /// (w(h) − w(−h))/(2h).
    pub finite_difference: f64,
    pub step: f64,
    pub relative_mismatch: f64,
    /// Agreement of the two values within 10⁻³ (relative) or 10⁻⁸ (absolute, when S = 0).
    pub consistent: bool,
    /// S/(2π²): the triple sum obtained with the resolvent derivative
    /// −R(χσ₃)R and the trace Tr((σ·m)σ₃(σ·m')σ₃) = −2m·m'.
    pub expansion_value: f64,
    pub expansion_mismatch: f64,
    pub w_zero: f64,
    pub cutoff: usize,
}

fn rel_mismatch(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

/// w'(0) by the closed-form triple sum and by a central difference of w(β).
pub fn w_prime_zero(profile: &MassProfile, cutoff: usize, fd_step: f64) -> Result<WPrimeReport> {
    require_mean_zero(profile)?;
    if !(fd_step > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    let ctx = FiberContext::new(profile, 1.0, cutoff)?;
    let s = hyp1_sum(profile, cutoff)?;
    let h = fd_step / profile.linf_norm.max(f64::MIN_POSITIVE);
    let (wp, wm) = rayon::join(|| w_value(&ctx, h), || w_value(&ctx, -h));
    let fd = (wp? - wm?) / (2.0 * h);
    let w_zero = w_value(&ctx, 0.0)?;
    let triple = -s / (4.0 * PI * PI);
    let expansion = s / (2.0 * PI * PI);
    let relative_mismatch = rel_mismatch(triple, fd);
    let consistent = if s == 0.0 {
        fd.abs() <= 1e-8 && triple.abs() <= 1e-8
    } else {
        relative_mismatch <= 1e-3
    };
    Ok(WPrimeReport {
        s_chi: s,
        triple_sum_value: triple,
        finite_difference: fd,
        step: h,
        relative_mismatch,
        consistent,
        expansion_value: expansion,
        expansion_mismatch: rel_mismatch(expansion, fd),
        w_zero,
        cutoff,
    })
}

/// ‖F_k(0)⁻¹‖ at α = 1; +∞ when F_k(0) is singular.
pub fn feshbach_inverse_norm(profile: &MassProfile, beta: f64, k: [f64; 2], cutoff: usize) -> Result<f64> {
    require_mean_zero(profile)?;
    if !(beta > 0.0 && beta < PI / (2.0 * profile.linf_norm)) {
        return invalid(format!(
            "beta must lie in (0, pi/(2 |chi|_inf)) = (0, {}), got {beta}",
            PI / (2.0 * profile.linf_norm)
        ));
    }
    let ctx = FiberContext::new(profile, 1.0, cutoff)?;
    let op = feshbach_operator(&ctx, beta, k)?;
    inverse_norm(&schur_matrix(&op, 0.0)?)
}

fn inverse_norm(f: &Mat2) -> Result<f64> {
    let s = f.singular_values();
    if !s[1].is_finite() {
        return numerical("Feshbach matrix is not finite");
    }
    Ok(if s[1] == 0.0 { f64::INFINITY } else { 1.0 / s[1] })
}

/// ‖W R₀(z) U‖ with W = √β√|χ_α|σ₃Q₀, U = √β Q₀ sgn(χ_α)√|χ_α| and
/// R₀(z) = (Q₀(h_k(α,0) − z)Q₀)⁻¹. With `signed = false` the sign
/// factor is dropped.
pub fn wru_norm(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    z: f64,
    cutoff: usize,
    k: [f64; 2],
    signed: bool,
) -> Result<f64> {
    if z.abs() > PI / 2.0 {
        return invalid(format!("|z| must not exceed pi/2, got {z}"));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let ts = sqrt_table(profile, alpha, cutoff, false)?;
    let tg = if signed {
        sqrt_table(profile, alpha, cutoff, true)?
    } else {
        ts.clone()
    };
    let cs = Convolver::new(cutoff, |d| ts.get(d));
    let cg = Convolver::new(cutoff, |d| tg.get(d));
    let ctx = FiberContext::new(profile, alpha, cutoff)?;
    let op = ctx.operator(0.0, k, false, 0.0)?;
    let n = op.dim();
    let one = C64::new(1.0, 0.0);
    let conv2 = |c: &Convolver, x: &[C64]| {
        let mut y = vec![zero(); x.len()];
        c.apply_strided(x, &mut y, 2, 0, one);
        c.apply_strided(x, &mut y, 2, 1, one);
        y
    };
    let sigma3 = |x: &mut [C64]| x.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v);
    let t = |x: &[C64]| {
        let mut u = kinetic_inverse(&op, z, &conv2(&cg, x));
        sigma3(&mut u);
        let mut y = conv2(&cs, &u);
        y.iter_mut().for_each(|v| *v *= beta);
        y
    };
    let th = |x: &[C64]| {
        let mut u = conv2(&cs, x);
        sigma3(&mut u);
        let mut y = conv2(&cg, &kinetic_inverse(&op, z, &u));
        y.iter_mut().for_each(|v| *v *= beta);
        y
    };
    let tt = |x: &[C64]| th(&t(x));
    Ok(lanczos_max(&tt, n, 0x17, 150, 1e-13)?.max(0.0).sqrt())
}

/// Fourier table of √|χ_α| (times sgn χ_α when `signed`). Sampled
/// profiles are checked against a second evaluation at twice the resolution.
fn sqrt_table(profile: &MassProfile, alpha: f64, cutoff: usize, signed: bool) -> Result<FourierTable> {
    // √|χ| has square-root kinks on the zero set, so the trapezoid rule
    // converges only algebraically
    let samples = 128 * (cutoff + 1);
    let root = profile.sqrt_abs_sampled(signed, samples)?;
    let t = FourierTable::build(&root, alpha, cutoff)?;
    if matches!(profile.shape, crate::potential::Shape::Modes { .. }) {
        let finer = profile.sqrt_abs_sampled(signed, 2 * samples)?;
        let t2 = FourierTable::build(&finer, alpha, cutoff)?;
        let mut worst = 0.0f64;
        let mut top = 0.0f64;
        for (a, b) in t.rows().iter().zip(t2.rows()) {
            worst = worst.max((a.2 - b.2).hypot(a.3 - b.3));
            top = top.max(b.2.hypot(b.3));
        }
        if worst > 1e-4 * top.max(f64::MIN_POSITIVE) {
            return numerical(format!(
                "quadrature for sqrt|chi| coefficients is not converged (change {worst:e})"
            ));
        }
    }
    Ok(t)
}

/// ‖√|χ_α| P₀‖: the exact value α·‖χ‖₁^{1/2} and the value in the
/// truncated basis, (Σ_m |(√|χ_α|)^(m)|²)^{1/2}.
pub fn sqrt_chi_p0_norm(profile: &MassProfile, alpha: f64, cutoff: usize) -> Result<(f64, f64)> {
    let t = sqrt_table(profile, alpha, cutoff, false)?;
    let c = cutoff as i64;
    let mut s = 0.0;
    for a in -c..=c {
        for b in -c..=c {
            s += t.get([a, b]).norm_sqr();
        }
    }
    Ok((alpha * profile.l1_norm.sqrt(), s.sqrt()))
}

/// Which branch of the gap analysis a configuration falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PhiPositive,
    PhiZeroSmallK,
    PhiZeroLargeK,
}

pub fn regime(profile: &MassProfile, beta: f64, k: [f64; 2]) -> Regime {
    if profile.phi.abs() > 1e-12 * profile.l2_norm.max(1.0) {
        Regime::PhiPositive
    } else if k[0].hypot(k[1]) <= 2.0 * beta * beta / (PI * PI) {
        Regime::PhiZeroSmallK
    } else {
        Regime::PhiZeroLargeK
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FeshbachReport {
    pub k: [f64; 2],
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub cutoff: usize,
    #[serde(rename = "F")]
    pub f: Mat2Json,
    pub q0_sigma_min: f64,
    pub q0_cond: f64,
    /// ‖F(z) − P₀(h − z)P₀‖.
    pub coupling_norm: f64,
    #[serde(rename = "W_vector")]
    pub w_vector: Option<[f64; 3]>,
    pub w_value: Option<f64>,
    pub s_chi: Option<f64>,
    #[serde(rename = "norm_WRU")]
    pub norm_wru: Option<f64>,
    #[serde(rename = "norm_Finv")]
    pub norm_finv: f64,
    pub regime: Regime,
}

/// All Schur-complement diagnostics at one (k, z).
pub fn feshbach_report(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    k: [f64; 2],
    z: f64,
    cutoff: usize,
) -> Result<FeshbachReport> {
    let ctx = FiberContext::new(profile, alpha, cutoff)?;
    let op = feshbach_operator(&ctx, beta, k)?;
    let sr = schur_complement(&op, z)?;
    let a = p0_block(&op).sub(&Mat2::IDENTITY.scale_re(z));
    let coupling_norm = a.sub(&sr.f).norm2();
    let f0 = if z == 0.0 { sr.f } else { schur_matrix(&op, 0.0)? };
    let phi_zero = regime(profile, beta, k) != Regime::PhiPositive;
    let (w_vector, w_val) = if alpha == 1.0 {
        let (_, w) = m_matrix_in(&ctx, beta, k)?;
        (Some(w), Some(w_value(&ctx, beta)?))
    } else {
        (None, None)
    };
    let s_chi = if phi_zero {
        match profile.mode_extent() {
            Some(e) if e as usize > cutoff => None,
            _ => Some(hyp1_sum(profile, cutoff)?),
        }
    } else {
        None
    };
    let norm_wru = if z.abs() <= PI / 2.0 {
        Some(wru_norm(profile, alpha, beta, z, cutoff, k, true)?)
    } else {
        None
    };
    Ok(FeshbachReport {
        k,
        z,
        alpha,
        beta,
        cutoff,
        f: sr.f.into(),
        q0_sigma_min: sr.q0_sigma_min,
        q0_cond: sr.q0_cond,
        coupling_norm,
        w_vector,
        w_value: w_val,
        s_chi,
        norm_wru,
        norm_finv: inverse_norm(&f0)?,
        regime: regime(profile, beta, k),
    })
}
