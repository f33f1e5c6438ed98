//! Parameter sweeps of the gap, log-log fits of the scaling exponents and
//! conversion to physical units.
//!
//! Conventions: every "gap" here is the half-width g of the spectral gap
//! (−g, g); the full gap is 2g.

use crate::error::{invalid, Result};
use crate::fiber::FiberContext;
use crate::gapscan::{global_gap_in, ScanSpec, SolverConfig};
use crate::potential::{hyp1_sum, MassProfile};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Least-squares fit of log(gap) = slope·log(param) + intercept.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    /// (parameter, gap) sorted by parameter.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit.
    pub stderr: f64,
    pub r_squared: f64,
}

/// Fits a power law through positive points. The result does not depend
/// on the order of the input.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return invalid(format!("a log-log fit needs at least 3 points, got {}", points.len()));
    }
    for &(x, y) in points {
        if !(x > 0.0 && x.is_finite() && y > 0.0 && y.is_finite()) {
            return invalid(format!("log-log fit needs positive finite values, got ({x}, {y})"));
        }
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len() as f64;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("log-log fit needs at least two distinct parameter values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(ScalingFit {
        points: pts,
        slope,
        intercept,
        stderr,
        r_squared,
    })
}

/// Cutoff rule M = max(m_min, ⌈c/α⌉).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffRule {
    pub c: f64,
    pub m_min: usize,
}

impl Default for CutoffRule {
    fn default() -> Self {
        CutoffRule { c: 4.0, m_min: 8 }
    }
}

impl CutoffRule {
    pub fn cutoff(&self, alpha: f64) -> usize {
        // the slack keeps 4/0.2 from rounding up to 21
        let m = (self.c / alpha - 1e-9).ceil().max(1.0) as usize;
        m.max(self.m_min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub beta: f64,
    pub cutoff: usize,
    pub gap: f64,
    pub certified_lower: f64,
    pub argmin_k: [f64; 2],
    pub residual: f64,
    /// Leading-order prediction: α²βΦ, or β³|S|/(8π²) for mean-zero profiles.
    pub prediction: f64,
    pub ratio: f64,
    /// False when the gap is below ten solver residuals.
    pub reliable: bool,
}

/// Constant C in gap ≥ α²β(Φ − C·αβ): the smallest C valid on every point
/// and the least-squares slope of the relative deviation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstantFit {
    pub c_fit: f64,
    pub c_least_squares: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    /// "alpha" or "beta".
    pub parameter: String,
    pub points: Vec<SweepPoint>,
    pub fit: ScalingFit,
    pub phi: f64,
    /// Triple sum S(χ), for mean-zero profiles.
    pub s_chi: Option<f64>,
    pub constant_fit: Option<ConstantFit>,
    /// gap/β³ divided by |S|/(8π²), per point, for mean-zero profiles.
    pub prefactor_ratios: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn is_mean_zero(profile: &MassProfile) -> bool {
    profile.phi.abs() <= 1e-12 * profile.l2_norm.max(1.0)
}

struct Job {
    alpha: f64,
    beta: f64,
    cutoff: usize,
}

fn run_jobs(
    profile: &MassProfile,
    jobs: &[Job],
    spec: &ScanSpec,
    cfg: &SolverConfig,
    s_chi: Option<f64>,
) -> Result<Vec<SweepPoint>> {
    jobs.par_iter()
        .map(|j| {
            let ctx = FiberContext::new(profile, j.alpha, j.cutoff)?;
            let r = global_gap_in(&ctx, j.beta, spec, cfg)?;
            let prediction = match s_chi {
                Some(s) => j.beta.powi(3) * s.abs() / (8.0 * PI * PI),
                None => j.alpha * j.alpha * j.beta * profile.phi,
            };
            Ok(SweepPoint {
                alpha: j.alpha,
                beta: j.beta,
                cutoff: j.cutoff,
                gap: r.grid_min,
                certified_lower: r.certified_lower,
                argmin_k: r.argmin_k,
                residual: r.residual_at_argmin,
                prediction,
                ratio: r.grid_min / prediction,
                reliable: r.grid_min >= 10.0 * r.residual_at_argmin,
            })
        })
        .collect()
}

fn finish(
    parameter: &str,
    profile: &MassProfile,
    points: Vec<SweepPoint>,
    s_chi: Option<f64>,
) -> Result<SweepReport> {
    let abscissa = |p: &SweepPoint| if parameter == "alpha" { p.alpha } else { p.beta };
    let mut warnings = Vec::new();
    let mut fit_pts = Vec::new();
    for p in &points {
        if p.reliable {
            fit_pts.push((abscissa(p), p.gap));
        } else {
            warnings.push(format!(
                "{parameter} = {}: gap {:e} is below 10 x residual {:e}; excluded from the fit",
                abscissa(p),
                p.gap,
                p.residual
            ));
        }
    }
    let fit = fit_loglog(&fit_pts)?;
    let constant_fit = if s_chi.is_none() {
        let c: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.reliable)
            .map(|p| {
                let ab = p.alpha * p.beta;
                let c = (profile.phi - p.gap / (p.alpha * p.alpha * p.beta)) / ab;
                (ab, c)
            })
            .collect();
        let c_fit = c.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max).max(0.0);
        // deviation gap/(α²βΦ) − 1 ≈ −(C/Φ)·αβ
        let num: f64 = c.iter().map(|(ab, cc)| ab * ab * cc).sum();
        let den: f64 = c.iter().map(|(ab, _)| ab * ab).sum();
        Some(ConstantFit {
            c_fit,
            c_least_squares: num / den,
        })
    } else {
        None
    };
    let prefactor_ratios = s_chi.map(|s| {
        points
            .iter()
            .map(|p| p.gap / p.beta.powi(3) / (s.abs() / (8.0 * PI * PI)))
            .collect()
    });
    Ok(SweepReport {
        parameter: parameter.to_string(),
        points,
        fit,
        phi: profile.phi,
        s_chi,
        constant_fit,
        prefactor_ratios,
        warnings,
    })
}

fn check_ascending(name: &str, v: &[f64]) -> Result<()> {
    if v.len() < 3 {
        return invalid(format!("a sweep needs at least 3 values of {name}, got {}", v.len()));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return invalid(format!("every {name} must be positive (log fit undefined otherwise)"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("{name} values must be strictly ascending"));
    }
    Ok(())
}

/// Gap versus α at fixed β, each point scanned at M = rule(α).
pub fn sweep_alpha(
    profile: &MassProfile,
    beta: f64,
    alphas: &[f64],
    rule: &CutoffRule,
    spec: &ScanSpec,
    cfg: &SolverConfig,
) -> Result<SweepReport> {
    if !(profile.phi > 0.0) {
        return invalid(format!("an alpha sweep needs Phi > 0, got {}", profile.phi));
    }
    check_ascending("alpha", alphas)?;
    if !(beta > 0.0) {
        return invalid("beta must be positive");
    }
    if let Some(a) = alphas.iter().find(|a| **a * beta > 0.2 + 1e-12) {
        return invalid(format!("alpha*beta must not exceed 0.2, got {} at alpha = {a}", a * beta));
    }
    let jobs: Vec<Job> = alphas
        .iter()
        .map(|&alpha| Job {
            alpha,
            beta,
            cutoff: rule.cutoff(alpha),
        })
        .collect();
    let points = run_jobs(profile, &jobs, spec, cfg, None)?;
    finish("alpha", profile, points, None)
}

/// Gap versus β at fixed α and cutoff. Mean-zero profiles are compared
/// with the cubic law and need β‖χ‖∞ < π/2.
pub fn sweep_beta(
    profile: &MassProfile,
    alpha: f64,
    betas: &[f64],
    cutoff: usize,
    spec: &ScanSpec,
    cfg: &SolverConfig,
) -> Result<SweepReport> {
    check_ascending("beta", betas)?;
    let s_chi = if is_mean_zero(profile) {
        if let Some(b) = betas.iter().find(|b| **b * profile.linf_norm >= PI / 2.0) {
            return invalid(format!("beta*|chi|_inf must stay below pi/2, got {}", b * profile.linf_norm));
        }
        let c = profile.mode_extent().map(|e| e as usize).unwrap_or(cutoff).max(1);
        Some(hyp1_sum(profile, c)?)
    } else {
        None
    };
    let jobs: Vec<Job> = betas
        .iter()
        .map(|&beta| Job { alpha, beta, cutoff })
        .collect();
    let points = run_jobs(profile, &jobs, spec, cfg, s_chi)?;
    finish("beta", profile, points, s_chi)
}

/// Relative change of the gap at fixed k when the cutoff grows by 4.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationStep {
    pub cutoff: usize,
    pub gap: f64,
    pub indicator: Option<f64>,
}

pub fn truncation_series(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    k: [f64; 2],
    cutoffs: &[usize],
    cfg: &SolverConfig,
) -> Result<Vec<TruncationStep>> {
    let gaps = cutoffs
        .par_iter()
        .map(|&m| {
            let ctx = FiberContext::new(profile, alpha, m)?;
            Ok(crate::gapscan::min_abs_eig_in(&ctx, beta, k, cfg)?.min_abs)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(cutoffs
        .iter()
        .enumerate()
        .map(|(i, &m)| TruncationStep {
            cutoff: m,
            gap: gaps[i],
            indicator: cutoffs
                .iter()
                .position(|&c| c == m + 4)
                .map(|j| (gaps[i] - gaps[j]).abs() / gaps[j]),
        })
        .collect())
}

/// A dimensionless half-width expressed in joules.
#[derive(Clone, Debug, Serialize)]
pub struct PhysicalGap {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub hbar_vf: f64,
    /// μL/(ħv_F).
    pub beta: f64,
    /// Full gap 2g·ħv_F/L.
    #[serde(rename = "E_g")]
    pub e_g: f64,
    /// μΦα², the size-independent reference value.
    pub mu_phi_alpha2: f64,
    /// 2μΦα², the full gap at leading order.
    pub leading_order_e_g: f64,
}

pub fn to_physical(gap_half_width: f64, alpha: f64, phi: f64, l: f64, mu: f64, hbar_vf: f64) -> Result<PhysicalGap> {
    if !(gap_half_width >= 0.0 && gap_half_width.is_finite()) {
        return invalid(format!("gap half-width must be finite and >= 0, got {gap_half_width}"));
    }
    if !(l > 0.0 && hbar_vf > 0.0 && mu >= 0.0) {
        return invalid("physical conversion needs L > 0, hbar_vf > 0 and mu >= 0");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    let r = mu * phi * alpha * alpha;
    Ok(PhysicalGap {
        l,
        mu,
        hbar_vf,
        beta: mu * l / hbar_vf,
        e_g: 2.0 * gap_half_width * hbar_vf / l,
        mu_phi_alpha2: r,
        leading_order_e_g: 2.0 * r,
    })
}
