//! Run configuration: a plain-text file of `key = value` lines grouped
//! under `[section]` headers. `#` and `;` start comments. Keys before the
//! first header belong to the top level (`seed`, `output_dir`).

use crate::error::{Error, Result};
use crate::experiments::CutoffRule;
use crate::fiber::SolverKind;
use crate::potential::{annulus_profile, normalize, MassProfile};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Square,
    Annulus,
    Grid,
    Modes,
    Constant,
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialConfig {
    pub shape: ShapeKind,
    pub r: f64,
    pub a: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub width: i64,
    pub path: Option<PathBuf>,
    pub height: f64,
    pub normalized: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Plane-wave cutoff M; filled from the cutoff rule when absent.
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub cutoff_c: f64,
    pub cutoff_min: usize,
    pub solver: SolverKind,
    pub residual_tol: f64,
    pub memory_limit_mb: f64,
    pub max_iter: usize,
    /// Bands nearest zero written by `bands`.
    pub bands: usize,
    /// Samples per segment of the Γ–X–M–Γ path.
    pub path_points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanConfig {
    pub grid_n: usize,
    pub refine_depth: usize,
    pub half_zone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Read `betas` as values of β‖χ‖∞.
    pub betas_relative: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeshbachConfig {
    pub z: f64,
    pub k1: f64,
    pub k2: f64,
    /// w'(0) step in units of 1/‖χ‖∞.
    pub fd_step: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputConfig {
    pub per_k_csv: bool,
    pub pretty: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhysicalConfig {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub hbar_vf: f64,
    /// When set, converted directly instead of running a scan.
    pub gap_half_width: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub potential: PotentialConfig,
    pub fiber: FiberConfig,
    pub scan: ScanConfig,
    pub sweep: SweepConfig,
    pub feshbach: FeshbachConfig,
    pub kernel: KernelConfig,
    pub output: OutputConfig,
    pub physical: PhysicalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            potential: PotentialConfig {
                shape: ShapeKind::Disk,
                r: 0.2,
                a: 0.4,
                n: 4,
                width: 1,
                path: None,
                height: 1.0,
                normalized: true,
            },
            fiber: FiberConfig {
                alpha: 0.3,
                beta: 0.2,
                cutoff: 0,
                cutoff_c: 4.0,
                cutoff_min: 8,
                solver: SolverKind::Dense,
                residual_tol: 1e-10,
                memory_limit_mb: crate::fiber::DEFAULT_MEMORY_LIMIT_MB,
                max_iter: 2000,
                bands: 8,
                path_points: 20,
            },
            scan: ScanConfig {
                grid_n: 9,
                refine_depth: 2,
                half_zone: true,
            },
            sweep: SweepConfig {
                alphas: vec![0.2, 0.25, 0.3, 0.35, 0.4],
                betas: vec![0.1, 0.15, 0.2, 0.25, 0.3],
                betas_relative: false,
            },
            feshbach: FeshbachConfig {
                z: 0.0,
                k1: 0.0,
                k2: 0.0,
                fd_step: 1e-3,
            },
            kernel: KernelConfig {
                r_min: 0.05,
                r_max: 4.0,
                samples: 200,
            },
            output: OutputConfig {
                per_k_csv: true,
                pretty: true,
            },
            physical: PhysicalConfig {
                l: 1e-8,
                mu: 1.602176634e-21,
                hbar_vf: 1.054571817e-28,
                gap_half_width: None,
            },
        }
    }
}

struct Entry<'a> {
    line: usize,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Config {
            line: self.line,
            section: self.section.to_string(),
            key: self.key.to_string(),
            msg: msg.into(),
        })
    }

    fn f64(&self) -> Result<f64> {
        match self.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => self.err(format!("expected a finite number, got `{}`", self.value)),
        }
    }

    fn usize(&self) -> Result<usize> {
        self.value
            .parse::<usize>()
            .or_else(|_| self.err(format!("expected a non-negative integer, got `{}`", self.value)))
    }

    fn i64(&self) -> Result<i64> {
        self.value
            .parse::<i64>()
            .or_else(|_| self.err(format!("expected an integer, got `{}`", self.value)))
    }

    fn bool(&self) -> Result<bool> {
        match self.value {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            v => self.err(format!("expected true or false, got `{v}`")),
        }
    }

    fn list(&self) -> Result<Vec<f64>> {
        let body = self.value.trim_start_matches('[').trim_end_matches(']');
        body.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => self.err(format!("expected a list of numbers, found `{s}`")),
            })
            .collect()
    }

    fn range(&self, v: f64, ok: bool, desc: &str) -> Result<f64> {
        if ok {
            Ok(v)
        } else {
            self.err(format!("out of range: [{}].{} ∈ {desc}, got {v}", self.section, self.key))
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let cut = line.find(['#', ';']).unwrap_or(line.len());
    line[..cut].trim()
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = "";
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut cutoff_set = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(Error::Config {
                    line: line_no,
                    section: section.to_string(),
                    key: String::new(),
                    msg: format!("malformed section header `{line}`"),
                });
            };
            let name = name.trim();
            if !matches!(
                name,
                "potential" | "fiber" | "scan" | "sweep" | "feshbach" | "kernel" | "output" | "physical"
            ) {
                return Err(Error::Config {
                    line: line_no,
                    section: name.to_string(),
                    key: String::new(),
                    msg: "unknown section".into(),
                });
            }
            section = name;
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config {
                line: line_no,
                section: section.to_string(),
                key: String::new(),
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let e = Entry {
            line: line_no,
            section,
            key: k.trim(),
            value: v.trim().trim_matches('"'),
        };
        if let Some(prev) = seen.insert((section.to_string(), e.key.to_string()), line_no) {
            return e.err(format!("duplicate key (first set on line {prev})"));
        }
        apply(&mut cfg, &e, &mut cutoff_set)?;
    }
    if !cutoff_set {
        let rule = CutoffRule {
            c: cfg.fiber.cutoff_c,
            m_min: cfg.fiber.cutoff_min,
        };
        cfg.fiber.cutoff = rule.cutoff(cfg.fiber.alpha);
    }
    cross_check(&cfg)?;
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, e: &Entry, cutoff_set: &mut bool) -> Result<()> {
    match (e.section, e.key) {
        ("", "seed") => {
            cfg.seed = e
                .value
                .parse::<u64>()
                .or_else(|_| e.err(format!("expected a non-negative integer, got `{}`", e.value)))?
        }
        ("", "output_dir") => cfg.output_dir = PathBuf::from(e.value),

        ("potential", "shape") => {
            cfg.potential.shape = match e.value {
                "disk" => ShapeKind::Disk,
                "square" => ShapeKind::Square,
                "annulus" => ShapeKind::Annulus,
                "grid" => ShapeKind::Grid,
                "modes" => ShapeKind::Modes,
                "constant" => ShapeKind::Constant,
                v => return e.err(format!("unknown shape `{v}` (disk, square, annulus, grid, modes, constant)")),
            }
        }
        ("potential", "r") => {
            let v = e.f64()?;
            cfg.potential.r = e.range(v, v > 0.0 && v <= 0.5, "(0, 1/2]")?;
        }
        ("potential", "a") => {
            let v = e.f64()?;
            cfg.potential.a = e.range(v, v > 0.0 && v <= 1.0, "(0, 1]")?;
        }
        ("potential", "N") => cfg.potential.n = e.i64()?,
        ("potential", "width") => cfg.potential.width = e.i64()?,
        ("potential", "path") => cfg.potential.path = Some(PathBuf::from(e.value)),
        ("potential", "height") => {
            let v = e.f64()?;
            cfg.potential.height = e.range(v, v != 0.0, "ℝ \\ {0}")?;
        }
        ("potential", "normalized") => cfg.potential.normalized = e.bool()?,

        ("fiber", "alpha") => {
            let v = e.f64()?;
            cfg.fiber.alpha = e.range(v, v > 0.0 && v <= 1.0, "(0,1]")?;
        }
        ("fiber", "beta") => {
            let v = e.f64()?;
            cfg.fiber.beta = e.range(v, v >= 0.0, "[0, ∞)")?;
        }
        ("fiber", "M") => {
            let v = e.usize()?;
            cfg.fiber.cutoff = e.range(v as f64, v >= 1, "[1, ∞)")? as usize;
            *cutoff_set = true;
        }
        ("fiber", "cutoff_c") => {
            let v = e.f64()?;
            cfg.fiber.cutoff_c = e.range(v, v > 0.0, "(0, ∞)")?;
        }
        ("fiber", "cutoff_min") => {
            let v = e.usize()?;
            cfg.fiber.cutoff_min = e.range(v as f64, v >= 1, "[1, ∞)")? as usize;
        }
        ("fiber", "solver") => {
            cfg.fiber.solver = match e.value {
                "dense" => SolverKind::Dense,
                "iterative" => SolverKind::Iterative,
                v => return e.err(format!("unknown solver `{v}` (dense, iterative)")),
            }
        }
        ("fiber", "residual_tol") => {
            let v = e.f64()?;
            cfg.fiber.residual_tol = e.range(v, v > 0.0 && v < 1.0, "(0, 1)")?;
        }
        ("fiber", "memory_limit_mb") => {
            let v = e.f64()?;
            cfg.fiber.memory_limit_mb = e.range(v, v > 0.0, "(0, ∞)")?;
        }
        ("fiber", "max_iter") => {
            let v = e.usize()?;
            cfg.fiber.max_iter = e.range(v as f64, v >= 1, "[1, ∞)")? as usize;
        }
        ("fiber", "bands") => {
            let v = e.usize()?;
            cfg.fiber.bands = e.range(v as f64, v >= 2, "[2, ∞)")? as usize;
        }
        ("fiber", "path_points") => {
            let v = e.usize()?;
            cfg.fiber.path_points = e.range(v as f64, v >= 1, "[1, ∞)")? as usize;
        }

        ("scan", "grid_n") => {
            let v = e.usize()?;
            if v % 2 == 0 {
                return e.err(format!("grid_n must be odd, got {v}"));
            }
            cfg.scan.grid_n = e.range(v as f64, v >= 3, "[3, ∞)")? as usize;
        }
        ("scan", "refine_depth") => cfg.scan.refine_depth = e.usize()?,
        ("scan", "half_zone") => cfg.scan.half_zone = e.bool()?,

        ("sweep", "alphas") => {
            let v = e.list()?;
            if v.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
                return e.err("out of range: every [sweep].alphas value ∈ (0,1]");
            }
            cfg.sweep.alphas = v;
        }
        ("sweep", "betas") => {
            let v = e.list()?;
            if v.iter().any(|b| !(*b > 0.0)) {
                return e.err("out of range: every [sweep].betas value ∈ (0, ∞)");
            }
            cfg.sweep.betas = v;
        }
        ("sweep", "betas_relative") => cfg.sweep.betas_relative = e.bool()?,

        ("feshbach", "z") => {
            let v = e.f64()?;
            cfg.feshbach.z = e.range(v, v.abs() <= std::f64::consts::FRAC_PI_2, "[-π/2, π/2]")?;
        }
        ("feshbach", "k1") => {
            let v = e.f64()?;
            cfg.feshbach.k1 = e.range(v, v.abs() <= 0.5, "[-1/2, 1/2]")?;
        }
        ("feshbach", "k2") => {
            let v = e.f64()?;
            cfg.feshbach.k2 = e.range(v, v.abs() <= 0.5, "[-1/2, 1/2]")?;
        }
        ("feshbach", "fd_step") => {
            let v = e.f64()?;
            cfg.feshbach.fd_step = e.range(v, v > 0.0 && v < 1.0, "(0, 1)")?;
        }

        ("kernel", "r_min") => {
            let v = e.f64()?;
            cfg.kernel.r_min = e.range(v, v > 0.0, "(0, ∞)")?;
        }
        ("kernel", "r_max") => {
            let v = e.f64()?;
            cfg.kernel.r_max = e.range(v, v > 0.0, "(0, ∞)")?;
        }
        ("kernel", "samples") => {
            let v = e.usize()?;
            cfg.kernel.samples = e.range(v as f64, v >= 2, "[2, ∞)")? as usize;
        }

        ("output", "per_k_csv") => cfg.output.per_k_csv = e.bool()?,
        ("output", "pretty") => cfg.output.pretty = e.bool()?,

        ("physical", "L") => {
            let v = e.f64()?;
            cfg.physical.l = e.range(v, v > 0.0, "(0, ∞)")?;
        }
        ("physical", "mu") => {
            let v = e.f64()?;
            cfg.physical.mu = e.range(v, v >= 0.0, "[0, ∞)")?;
        }
        ("physical", "hbar_vf") => {
            let v = e.f64()?;
            cfg.physical.hbar_vf = e.range(v, v > 0.0, "(0, ∞)")?;
        }
        ("physical", "gap_half_width") => {
            let v = e.f64()?;
            cfg.physical.gap_half_width = Some(e.range(v, v >= 0.0, "[0, ∞)")?);
        }

        _ => return e.err("unknown key"),
    }
    Ok(())
}

fn whole(msg: String) -> Error {
    Error::Config {
        line: 0,
        section: String::new(),
        key: String::new(),
        msg,
    }
}

fn cross_check(cfg: &RunConfig) -> Result<()> {
    let p = &cfg.potential;
    if p.shape == ShapeKind::Annulus && !(p.width >= 1 && p.n > p.width) {
        return Err(whole(format!(
            "[potential] annulus needs N > width >= 1, got N = {}, width = {}",
            p.n, p.width
        )));
    }
    if matches!(p.shape, ShapeKind::Grid | ShapeKind::Modes) && p.path.is_none() {
        return Err(whole("[potential].path is required for grid and modes shapes".into()));
    }
    if matches!(p.shape, ShapeKind::Annulus | ShapeKind::Modes) && cfg.fiber.alpha != 1.0 {
        return Err(whole(format!(
            "[fiber].alpha must be 1 for full-cell profiles ({:?}), got {}",
            p.shape, cfg.fiber.alpha
        )));
    }
    if cfg.kernel.r_min >= cfg.kernel.r_max {
        return Err(whole("[kernel] needs r_min < r_max".into()));
    }
    Ok(())
}

/// Builds the mass profile described by `[potential]`. Relative paths
/// are resolved against `base`.
pub fn build_profile(cfg: &PotentialConfig, base: &Path) -> Result<MassProfile> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let p = match cfg.shape {
        ShapeKind::Disk => MassProfile::disk(cfg.r, cfg.height)?,
        ShapeKind::Square => MassProfile::square(cfg.a, cfg.height)?,
        ShapeKind::Constant => MassProfile::constant(cfg.height)?,
        ShapeKind::Annulus => annulus_profile(cfg.n, cfg.width)?.with_height(cfg.height)?,
        ShapeKind::Grid => {
            let text = std::fs::read_to_string(resolve(cfg.path.as_deref().unwrap_or(Path::new(""))))?;
            let (n, values) = read_grid(&text)?;
            MassProfile::grid(n, values, cfg.height)?
        }
        ShapeKind::Modes => {
            let path = resolve(cfg.path.as_deref().unwrap_or(Path::new("")));
            MassProfile::modes(read_modes(&path)?, cfg.height)?
        }
    };
    if cfg.normalized {
        normalize(&p)
    } else {
        Ok(p)
    }
}

/// n lines of n whitespace-separated samples on the nodes −1/2 + j/n.
fn read_grid(text: &str) -> Result<(usize, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(strip_comment)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Validation(format!("bad grid sample `{s}`"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Validation("grid file must hold an n x n array of samples".into()));
    }
    Ok((n, rows.into_iter().flatten().collect()))
}

#[derive(serde::Deserialize)]
struct ModeRow {
    m1: i64,
    m2: i64,
    re: f64,
    im: f64,
}

/// CSV with header m1,m2,re,im, the same layout `fourier` writes.
fn read_modes(path: &Path) -> Result<BTreeMap<(i64, i64), C64>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Validation(format!("modes file: {e}")))?;
    let mut map = BTreeMap::new();
    for row in rd.deserialize::<ModeRow>() {
        let r = row.map_err(|e| Error::Validation(format!("modes file: {e}")))?;
        map.insert((r.m1, r.m2), C64::new(r.re, r.im));
    }
    Ok(map)
}
