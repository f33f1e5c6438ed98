//! Brillouin-zone scan for the gap around zero energy.
//!
//! The zone is tiled by grid_n × grid_n square cells sampled at their
//! centers. Since eigenvalues of h_k move at most 2π|k − k'|, a cell of
//! side h whose center has min|λ| = f cannot contain a point with
//! min|λ| < f − 2π·h/√2. Cells near the incumbent minimum are split into
//! four children for each refinement round.

use crate::error::{invalid, Result};
use crate::fiber::lobpcg::LobpcgOptions;
use crate::fiber::{
    eigenvalues_dense, eigenvalues_near_zero_with, FiberContext, SolverKind, DEFAULT_MEMORY_LIMIT_MB,
};
use crate::potential::MassProfile;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Solver choice for each k-point.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub solver: SolverKind,
    pub memory_limit_mb: f64,
    /// Dense runs above this dimension switch to the iterative solver.
    pub iterative_above: usize,
    pub lobpcg: LobpcgOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            solver: SolverKind::Dense,
            memory_limit_mb: DEFAULT_MEMORY_LIMIT_MB,
            iterative_above: 5000,
            lobpcg: LobpcgOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn iterative() -> Self {
        SolverConfig {
            solver: SolverKind::Iterative,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanSpec {
    pub grid_n: usize,
    pub refine_depth: usize,
    pub half_zone: bool,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            grid_n: 9,
            refine_depth: 2,
            half_zone: true,
        }
    }
}

/// min|λ| at one k together with the solver residual.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PointValue {
    pub min_abs: f64,
    pub residual: f64,
}

/// min|λ| of the truncated h_k with the given solver configuration.
pub fn min_abs_eig_in(
    ctx: &FiberContext,
    beta: f64,
    k: [f64; 2],
    cfg: &SolverConfig,
) -> Result<PointValue> {
    let iterative =
        cfg.solver == SolverKind::Iterative || ctx.basis.dim() > cfg.iterative_above;
    let op = ctx.operator(beta, k, !iterative, cfg.memory_limit_mb)?;
    let s = if iterative {
        eigenvalues_near_zero_with(&op, 2, &cfg.lobpcg)?
    } else {
        eigenvalues_dense(&op)?
    };
    Ok(PointValue {
        min_abs: s.min_abs(),
        residual: s.residual_bound,
    })
}

/// min|λ| over the truncated spectrum of h_k (dense solver).
pub fn min_abs_eig(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    k: [f64; 2],
    cutoff: usize,
) -> Result<f64> {
    let ctx = FiberContext::new(profile, alpha, cutoff)?;
    Ok(min_abs_eig_in(&ctx, beta, k, &SolverConfig::default())?.min_abs)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub spacing: f64,
    pub new_points: usize,
    pub grid_min: f64,
    pub certified_lower: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KSample {
    pub k1: f64,
    pub k2: f64,
    pub min_abs: f64,
    pub level: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub grid_min: f64,
    pub argmin_k: [f64; 2],
    pub certified_lower: f64,
    pub k_grid_spec: ScanSpec,
    pub levels: Vec<LevelSummary>,
    /// Solver residual at the argmin.
    pub residual_at_argmin: f64,
    /// Distinct k-points diagonalized.
    pub evaluations: usize,
    #[serde(skip)]
    pub per_k_table: Vec<KSample>,
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    c: [f64; 2],
    h: f64,
    lower: f64,
    level: usize,
}

fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

type Key = (u64, u64);

fn key(k: [f64; 2], half_zone: bool) -> Key {
    let a = [clean(k[0]), clean(k[1])];
    if !half_zone {
        return (a[0].to_bits(), a[1].to_bits());
    }
    let b = [clean(-k[0]), clean(-k[1])];
    let pick = match a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])) {
        std::cmp::Ordering::Less => b,
        _ => a,
    };
    (pick[0].to_bits(), pick[1].to_bits())
}

fn from_key(k: Key) -> [f64; 2] {
    [f64::from_bits(k.0), f64::from_bits(k.1)]
}

fn lex(a: [f64; 2], b: [f64; 2]) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

/// Scan with refinement; evaluations run in parallel and are reduced
/// deterministically.
pub fn global_gap_in(
    ctx: &FiberContext,
    beta: f64,
    spec: &ScanSpec,
    cfg: &SolverConfig,
) -> Result<GapReport> {
    let n = spec.grid_n;
    if n < 3 || n % 2 == 0 {
        return invalid(format!("grid_n must be odd and >= 3 (so k = 0 is sampled), got {n}"));
    }
    let h0 = 1.0 / n as f64;
    let slack = |h: f64| 2.0 * PI * h / 2f64.sqrt();
    let mut cache: BTreeMap<Key, PointValue> = BTreeMap::new();
    let evaluate = |cells: &[Cell], cache: &mut BTreeMap<Key, PointValue>| -> Result<usize> {
        let mut need: Vec<Key> = cells.iter().map(|c| key(c.c, spec.half_zone)).collect();
        need.sort_unstable();
        need.dedup();
        need.retain(|k| !cache.contains_key(k));
        let vals = need
            .par_iter()
            .map(|&kk| min_abs_eig_in(ctx, beta, from_key(kk), cfg))
            .collect::<Result<Vec<_>>>()?;
        let added = need.len();
        for (kk, v) in need.into_iter().zip(vals) {
            cache.insert(kk, v);
        }
        Ok(added)
    };
    // integer numerators keep center(j) = −center(n − 1 − j) exactly
    let center = |j: usize| clean((2 * j as i64 + 1 - n as i64) as f64 / (2 * n) as f64);
    let mut leaves: Vec<Cell> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| Cell {
            c: [center(a), center(b)],
            h: h0,
            lower: f64::NEG_INFINITY,
            level: 0,
        })
        .collect();
    let mut evaluated: Vec<(Cell, f64)> = Vec::new();
    let mut levels = Vec::new();
    let mut grid_min = f64::INFINITY;
    let mut argmin = [0.0, 0.0];
    let mut pending: Vec<Cell> = leaves.clone();
    for level in 0..=spec.refine_depth {
        let added = evaluate(&pending, &mut cache)?;
        for c in pending.iter() {
            let f = cache[&key(c.c, spec.half_zone)].min_abs;
            evaluated.push((*c, f));
            if f < grid_min || (f == grid_min && lex(c.c, argmin).is_lt()) {
                grid_min = f;
                argmin = c.c;
            }
        }
        for c in leaves.iter_mut() {
            let f = cache[&key(c.c, spec.half_zone)].min_abs;
            c.lower = c.lower.max(f - slack(c.h));
        }
        let certified = leaves
            .iter()
            .map(|c| c.lower)
            .fold(f64::INFINITY, f64::min)
            .min(grid_min);
        levels.push(LevelSummary {
            level,
            spacing: leaves.iter().map(|c| c.h).fold(f64::INFINITY, f64::min),
            new_points: added,
            grid_min,
            certified_lower: certified,
        });
        if level == spec.refine_depth {
            break;
        }
        let mut next = Vec::with_capacity(leaves.len());
        pending.clear();
        for c in &leaves {
            let f = cache[&key(c.c, spec.half_zone)].min_abs;
            if f <= grid_min + 2.0 * PI * c.h {
                let q = c.h / 4.0;
                for (dx, dy) in [(-q, -q), (-q, q), (q, -q), (q, q)] {
                    let child = Cell {
                        c: [clean(c.c[0] + dx), clean(c.c[1] + dy)],
                        h: c.h / 2.0,
                        lower: c.lower,
                        level: level + 1,
                    };
                    pending.push(child);
                    next.push(child);
                }
            } else {
                next.push(*c);
            }
        }
        leaves = next;
    }
    let certified_lower = levels.last().map(|l| l.certified_lower).unwrap_or(f64::NEG_INFINITY);
    evaluated.sort_by(|a, b| a.0.level.cmp(&b.0.level).then(lex(a.0.c, b.0.c)));
    let per_k_table = evaluated
        .iter()
        .map(|(c, f)| KSample {
            k1: c.c[0],
            k2: c.c[1],
            min_abs: *f,
            level: c.level,
        })
        .collect();
    Ok(GapReport {
        grid_min,
        argmin_k: argmin,
        certified_lower,
        k_grid_spec: spec.clone(),
        levels,
        residual_at_argmin: cache[&key(argmin, spec.half_zone)].residual,
        evaluations: cache.len(),
        per_k_table,
    })
}

/// Scan of Ω with the dense solver and half-zone reduction.
pub fn global_gap(
    profile: &MassProfile,
    alpha: f64,
    beta: f64,
    cutoff: usize,
    grid_n: usize,
    refine_depth: usize,
) -> Result<GapReport> {
    let ctx = FiberContext::new(profile, alpha, cutoff)?;
    let spec = ScanSpec {
        grid_n,
        refine_depth,
        half_zone: true,
    };
    global_gap_in(&ctx, beta, &spec, &SolverConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_grid_rejected() {
        let p = MassProfile::constant(1.0).unwrap();
        assert!(global_gap(&p, 1.0, 0.5, 2, 8, 0).is_err());
    }

    #[test]
    fn canonical_key_is_symmetric() {
        let k = [0.125, -0.375];
        assert_eq!(key(k, true), key([-0.125, 0.375], true));
        assert_eq!(key([0.0, -0.0], true), key([-0.0, 0.0], true));
        assert_ne!(key(k, false), key([-0.125, 0.375], false));
    }

    #[test]
    fn free_corner_value() {
        let p = MassProfile::disk(0.2, 1.0).unwrap();
        let v = min_abs_eig(&p, 0.5, 0.0, [0.5, 0.5], 2).unwrap();
        assert!((v - PI * 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn constant_mass_scan() {
        let p = MassProfile::constant(1.0).unwrap();
        let r = global_gap(&p, 1.0, 0.5, 3, 5, 1).unwrap();
        assert!((r.grid_min - 0.5).abs() < 1e-9);
        assert_eq!(r.argmin_k, [0.0, 0.0]);
        assert!(r.certified_lower <= r.grid_min);
        assert_eq!(r.levels[0].new_points, 13);
        for w in r.levels.windows(2) {
            assert!(w[1].grid_min <= w[0].grid_min);
            assert!(w[1].certified_lower >= w[0].certified_lower);
        }
    }

    #[test]
    fn gapless_without_mass() {
        let p = MassProfile::disk(0.2, 1.0).unwrap();
        let r = global_gap(&p, 0.5, 0.0, 2, 3, 0).unwrap();
        assert!(r.grid_min < 1e-10);
    }
}
