//! Command-line front end: subcommand dispatch, output files and the run
//! manifest.

use crate::bessel::{bessel_j1, kernel_bound_check, kernel_sample};
use crate::config::{build_profile, parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{fit_loglog, sweep_alpha, sweep_beta, to_physical, CutoffRule, SweepReport};
use crate::feshbach::{
    feshbach_operator, feshbach_report, q0_smallest_singular, schur_matrix, w_prime_zero, wru_norm,
};
use crate::fiber::lobpcg::LobpcgOptions;
use crate::fiber::{eigenvalues_dense, eigenvalues_near_zero_with, FiberContext, SolverKind};
use crate::gapscan::{global_gap_in, min_abs_eig, ScanSpec, SolverConfig};
use crate::pauli::Mat2;
use crate::potential::{annulus_profile, hyp1_report, hyp1_sum, normalize, single_cosine, FourierTable, MassProfile};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "antidot", version, about = "Spectral gaps of Dirac operators with periodic mass insertions")]
pub struct Cli {
    /// Configuration file (sectioned key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for randomized vectors; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Fourier table of the scaled profile.
    Fourier,
    /// Bands nearest zero along Γ–X–M–Γ.
    Bands,
    /// Brillouin-zone scan for the gap half-width.
    Gap,
    /// Gap versus α with a log-log fit.
    SweepAlpha,
    /// Gap versus β with a log-log fit.
    SweepBeta,
    /// The triple sum S(χ).
    Hyp1,
    /// Schur-complement diagnostics at one (k, z).
    Feshbach,
    /// Free resolvent kernel against its decay envelope.
    Kernel,
    /// Gap converted to joules.
    Physical,
    /// Quick end-to-end checks of known exact cases.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fourier => "fourier",
            Command::Bands => "bands",
            Command::Gap => "gap",
            Command::SweepAlpha => "sweep-alpha",
            Command::SweepBeta => "sweep-beta",
            Command::Hyp1 => "hyp1",
            Command::Feshbach => "feshbach",
            Command::Kernel => "kernel",
            Command::Physical => "physical",
            Command::Selftest => "selftest",
        }
    }
}

/// Collects the files written during one run.
struct Out {
    dir: PathBuf,
    pretty: bool,
    files: Vec<String>,
}

impl Out {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let s = if self.pretty {
            serde_json::to_string_pretty(v)
        } else {
            serde_json::to_string(v)
        }
        .map_err(|e| Error::Numerical(format!("serializing {name}: {e}")))?;
        let p = self.path(name);
        std::fs::write(p, s + "\n")?;
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(p).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, body)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        solver: cfg.fiber.solver,
        memory_limit_mb: cfg.fiber.memory_limit_mb,
        iterative_above: 5000,
        lobpcg: LobpcgOptions {
            tol: cfg.fiber.residual_tol,
            max_iter: cfg.fiber.max_iter,
            seed: cfg.seed,
            ..LobpcgOptions::default()
        },
    }
}

fn scan_spec(cfg: &RunConfig) -> ScanSpec {
    ScanSpec {
        grid_n: cfg.scan.grid_n,
        refine_depth: cfg.scan.refine_depth,
        half_zone: cfg.scan.half_zone,
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(dir) => {
            eprintln!("{} finished; outputs in {}", cli.command.name(), dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Executes one subcommand and returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let start = Instant::now();
    let (text, base) = match &cli.config {
        Some(p) => (
            std::fs::read_to_string(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (String::new(), PathBuf::from(".")),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    // a global pool may already exist when called repeatedly in-process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Out {
        dir: cfg.output_dir.clone(),
        pretty: cfg.output.pretty,
        files: Vec::new(),
    };
    let result = dispatch(cli.command, &cfg, &base, &mut out);
    let manifest = json!({
        "subcommand": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_path": cli.config,
        "config": cfg,
        "seed": cfg.seed,
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "files": out.files,
        "status": match &result { Ok(()) => "ok".to_string(), Err(e) => e.to_string() },
        "exit_code": match &result { Ok(()) => 0, Err(e) => e.exit_code() },
    });
    let p = out.dir.join("manifest.json");
    std::fs::write(p, serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n")?;
    result.map(|_| cfg.output_dir.clone())
}

fn dispatch(cmd: Command, cfg: &RunConfig, base: &Path, out: &mut Out) -> Result<()> {
    if cmd == Command::Selftest {
        return selftest(out);
    }
    if cmd == Command::Kernel {
        return kernel(cfg, out);
    }
    let profile = build_profile(&cfg.potential, base)?;
    match cmd {
        Command::Fourier => fourier(cfg, &profile, out),
        Command::Bands => bands(cfg, &profile, out),
        Command::Gap => gap(cfg, &profile, out),
        Command::SweepAlpha => {
            let rule = CutoffRule {
                c: cfg.fiber.cutoff_c,
                m_min: cfg.fiber.cutoff_min,
            };
            let r = sweep_alpha(
                &profile,
                cfg.fiber.beta,
                &cfg.sweep.alphas,
                &rule,
                &scan_spec(cfg),
                &solver_config(cfg),
            )?;
            write_sweep("sweep_alpha", &r, out)
        }
        Command::SweepBeta => {
            let betas: Vec<f64> = if cfg.sweep.betas_relative {
                cfg.sweep.betas.iter().map(|b| b / profile.linf_norm).collect()
            } else {
                cfg.sweep.betas.clone()
            };
            let r = sweep_beta(
                &profile,
                cfg.fiber.alpha,
                &betas,
                cfg.fiber.cutoff,
                &scan_spec(cfg),
                &solver_config(cfg),
            )?;
            write_sweep("sweep_beta", &r, out)
        }
        Command::Hyp1 => {
            let r = hyp1_report(&profile, cfg.fiber.cutoff)?;
            println!("S = {:.15e} (cutoff {}, {} terms)", r.value, r.cutoff, r.terms);
            out.json("hyp1.json", &r)
        }
        Command::Feshbach => feshbach(cfg, &profile, out),
        Command::Physical => physical(cfg, &profile, out),
        Command::Kernel | Command::Selftest => unreachable!(),
    }
}

#[derive(Serialize)]
struct FourierRow {
    m1: i64,
    m2: i64,
    re: f64,
    im: f64,
}

fn fourier(cfg: &RunConfig, p: &MassProfile, out: &mut Out) -> Result<()> {
    let t = FourierTable::build(p, cfg.fiber.alpha, cfg.fiber.cutoff)?;
    let rows: Vec<FourierRow> = t
        .rows()
        .into_iter()
        .map(|(m1, m2, re, im)| FourierRow { m1, m2, re, im })
        .collect();
    out.csv("fourier_table.csv", &rows)?;
    out.json(
        "fourier.json",
        &json!({
            "shape": p.shape_name(),
            "height": p.height,
            "phi": p.phi,
            "l1_norm": p.l1_norm,
            "l2_norm": p.l2_norm,
            "linf_norm": p.linf_norm,
            "normalized": p.normalized,
            "alpha": cfg.fiber.alpha,
            "cutoff": cfg.fiber.cutoff,
            "span": t.span(),
            "entries": rows.len(),
            "symmetry_defect": t.symmetry_defect(),
        }),
    )
}

#[derive(Serialize)]
struct BandRow {
    k1: f64,
    k2: f64,
    band_index: usize,
    eigenvalue: f64,
}

fn band_path(per_segment: usize) -> Vec<[f64; 2]> {
    let corners = [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.0]];
    let mut ks = Vec::new();
    for w in corners.windows(2) {
        for i in 0..per_segment {
            let t = i as f64 / per_segment as f64;
            ks.push([w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])]);
        }
    }
    ks.push([0.0, 0.0]);
    ks
}

fn bands(cfg: &RunConfig, p: &MassProfile, out: &mut Out) -> Result<()> {
    use rayon::prelude::*;
    let ctx = FiberContext::new(p, cfg.fiber.alpha, cfg.fiber.cutoff)?;
    let sc = solver_config(cfg);
    let count = cfg.fiber.bands.min(ctx.basis.dim());
    let iterative = sc.solver == SolverKind::Iterative || ctx.basis.dim() > sc.iterative_above;
    let ks = band_path(cfg.fiber.path_points);
    let spectra = ks
        .par_iter()
        .map(|&k| {
            let op = ctx.operator(cfg.fiber.beta, k, !iterative, sc.memory_limit_mb)?;
            let mut v = if iterative {
                eigenvalues_near_zero_with(&op, count, &sc.lobpcg)?.eigenvalues
            } else {
                let mut all = eigenvalues_dense(&op)?.eigenvalues;
                all.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
                all.truncate(count);
                all
            };
            v.sort_by(f64::total_cmp);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (k, vals) in ks.iter().zip(&spectra) {
        for (i, &e) in vals.iter().enumerate() {
            rows.push(BandRow {
                k1: k[0],
                k2: k[1],
                band_index: i,
                eigenvalue: e,
            });
        }
    }
    out.csv("bands.csv", &rows)?;
    let min_abs = spectra.iter().flatten().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    out.json(
        "bands.json",
        &json!({
            "k_points": ks.len(),
            "bands": count,
            "cutoff": cfg.fiber.cutoff,
            "dimension": ctx.basis.dim(),
            "solver": if iterative { "iterative" } else { "dense" },
            "min_abs_on_path": min_abs,
        }),
    )
}

fn gap(cfg: &RunConfig, p: &MassProfile, out: &mut Out) -> Result<()> {
    let ctx = FiberContext::new(p, cfg.fiber.alpha, cfg.fiber.cutoff)?;
    let r = global_gap_in(&ctx, cfg.fiber.beta, &scan_spec(cfg), &solver_config(cfg))?;
    println!(
        "gap half-width {:.12e} at k = ({}, {}), certified lower bound {:.6e}",
        r.grid_min, r.argmin_k[0], r.argmin_k[1], r.certified_lower
    );
    out.json("gap.json", &r)?;
    if cfg.output.per_k_csv {
        out.csv("gap_k.csv", &r.per_k_table)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    alpha: f64,
    beta: f64,
    cutoff: usize,
    gap: f64,
    certified_lower: f64,
    residual: f64,
    prediction: f64,
    ratio: f64,
    reliable: bool,
}

fn write_sweep(stem: &str, r: &SweepReport, out: &mut Out) -> Result<()> {
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "slope {:.6} ± {:.2e} (r² = {:.8}) over {} points",
        r.fit.slope,
        r.fit.stderr,
        r.fit.r_squared,
        r.fit.points.len()
    );
    out.json(&format!("{stem}.json"), r)?;
    let rows: Vec<SweepRow> = r
        .points
        .iter()
        .map(|p| SweepRow {
            alpha: p.alpha,
            beta: p.beta,
            cutoff: p.cutoff,
            gap: p.gap,
            certified_lower: p.certified_lower,
            residual: p.residual,
            prediction: p.prediction,
            ratio: p.ratio,
            reliable: p.reliable,
        })
        .collect();
    out.csv(&format!("{stem}.csv"), &rows)?;
    let mut dat = format!("# {} gap_half_width\n", r.parameter);
    for (x, y) in &r.fit.points {
        dat.push_str(&format!("{x:.17e} {y:.17e}\n"));
    }
    out.text(&format!("{stem}.dat"), &dat)
}

fn feshbach(cfg: &RunConfig, p: &MassProfile, out: &mut Out) -> Result<()> {
    let k = [cfg.feshbach.k1, cfg.feshbach.k2];
    let r = feshbach_report(p, cfg.fiber.alpha, cfg.fiber.beta, k, cfg.feshbach.z, cfg.fiber.cutoff)?;
    let wp = if cfg.fiber.alpha == 1.0 && p.phi.abs() <= 1e-12 * p.l2_norm.max(1.0) {
        Some(w_prime_zero(p, cfg.fiber.cutoff, cfg.feshbach.fd_step)?)
    } else {
        None
    };
    out.json("feshbach.json", &json!({ "report": r, "w_prime_zero": wp }))
}

fn kernel(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let r = kernel_bound_check(cfg.kernel.r_min, cfg.kernel.r_max, cfg.kernel.samples)?;
    out.csv("kernel.csv", &r.samples)?;
    println!(
        "max bound ratio {:.6} vs envelope {:.6}: {}",
        r.max_ratio,
        r.envelope,
        if r.within_envelope { "within" } else { "EXCEEDED" }
    );
    out.json(
        "kernel.json",
        &json!({
            "r_min": cfg.kernel.r_min,
            "r_max": cfg.kernel.r_max,
            "samples": cfg.kernel.samples,
            "max_ratio": r.max_ratio,
            "envelope": r.envelope,
            "within_envelope": r.within_envelope,
            "small_r_ratio": r.small_r_ratio,
        }),
    )
}

fn physical(cfg: &RunConfig, p: &MassProfile, out: &mut Out) -> Result<()> {
    let ph = &cfg.physical;
    let beta = ph.mu * ph.l / ph.hbar_vf;
    let (g, scanned) = match ph.gap_half_width {
        Some(g) => (g, false),
        None => {
            let ctx = FiberContext::new(p, cfg.fiber.alpha, cfg.fiber.cutoff)?;
            let r = global_gap_in(&ctx, beta, &scan_spec(cfg), &solver_config(cfg))?;
            (r.grid_min, true)
        }
    };
    let r = to_physical(g, cfg.fiber.alpha, p.phi, ph.l, ph.mu, ph.hbar_vf)?;
    println!("E_g = {:.6e} J (beta = {:.6})", r.e_g, r.beta);
    out.json(
        "physical.json",
        &json!({ "gap_half_width": g, "scanned": scanned, "result": r }),
    )
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn selftest_checks() -> Vec<Check> {
    let disk = || MassProfile::disk(0.2, 1.0);
    vec![
        check("j1_at_zero", || Ok((bessel_j1(0.0) == 0.0, format!("{}", bessel_j1(0.0))))),
        check("free_dispersion", || {
            let ctx = FiberContext::new(&disk()?, 0.5, 2)?;
            let s = eigenvalues_dense(&ctx.operator(0.0, [0.0, 0.0], true, 64.0)?)?;
            let mut want: Vec<f64> = (0..ctx.basis.waves())
                .flat_map(|i| {
                    let m = ctx.basis.m(i);
                    let e = 2.0 * PI * (m[0] as f64).hypot(m[1] as f64);
                    [e, -e]
                })
                .collect();
            want.sort_by(f64::total_cmp);
            let err = s.eigenvalues.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let zeros = s.eigenvalues.iter().filter(|x| x.abs() < 1e-10).count();
            Ok((err < 1e-10 && zeros == 2, format!("max error {err:e}, zero modes {zeros}")))
        }),
        check("spectrum_traceless", || {
            let ctx = FiberContext::new(&normalize(&disk()?)?, 0.3, 3)?;
            let op = ctx.operator(0.2, [0.1, -0.2], true, 64.0)?;
            let s = eigenvalues_dense(&op)?;
            let sum: f64 = s.eigenvalues.iter().sum();
            Ok((sum.abs() <= 1e-9 * op.norm_estimate(), format!("sum {sum:e}")))
        }),
        check("gapless_without_mass", || {
            let v = min_abs_eig(&disk()?, 0.5, 0.0, [0.0, 0.0], 3)?;
            Ok((v < 1e-10, format!("{v:e}")))
        }),
        check("free_zone_corner", || {
            let v = min_abs_eig(&disk()?, 0.5, 0.0, [0.5, 0.5], 3)?;
            Ok(((v - PI * 2f64.sqrt()).abs() < 1e-10, format!("{v}")))
        }),
        check("single_cosine_s_zero", || {
            let s = hyp1_sum(&single_cosine((2, 1))?, 4)?;
            Ok((s == 0.0, format!("{s:e}")))
        }),
        check("annulus_mean_zero", || {
            let p = annulus_profile(4, 1)?;
            Ok((p.phi == 0.0, format!("Phi = {}", p.phi)))
        }),
        check("normalize_square", || {
            let p = normalize(&MassProfile::square(0.4, 1.0)?)?;
            let again = normalize(&p)?;
            let ok = (p.height - 2.5).abs() < 1e-12
                && (p.phi - 0.4).abs() < 1e-12
                && (again.height - p.height).abs() < 1e-12;
            Ok((ok, format!("height {}, Phi {}", p.height, p.phi)))
        }),
        check("fit_needs_three_points", || Ok((fit_loglog(&[(1.0, 1.0)]).is_err(), String::new()))),
        check("physical_zero_gap", || {
            let r = to_physical(0.0, 0.3, 0.35, 1e-8, 1e-21, 1e-28)?;
            Ok((r.e_g == 0.0, format!("{}", r.e_g)))
        }),
        check("physical_size_invariance", || {
            let a = to_physical(0.01, 0.3, 0.35, 1e-8, 1e-21, 1e-28)?;
            let b = to_physical(0.02, 0.3, 0.35, 2e-8, 1e-21, 1e-28)?;
            let ok = a.mu_phi_alpha2 == b.mu_phi_alpha2 && (b.beta - 2.0 * a.beta).abs() <= 1e-15 * b.beta;
            Ok((ok, format!("beta {} -> {}", a.beta, b.beta)))
        }),
        check("wru_zero_beta", || {
            let v = wru_norm(&disk()?, 0.3, 0.0, 0.0, 4, [0.0, 0.0], true)?;
            Ok((v == 0.0, format!("{v}")))
        }),
        check("q0_gap_free", || {
            let ctx = FiberContext::new(&disk()?, 0.5, 3)?;
            let v = q0_smallest_singular(&feshbach_operator(&ctx, 0.0, [0.0, 0.0])?, 0.0)?;
            Ok(((v - 2.0 * PI).abs() < 1e-10, format!("{v}")))
        }),
        check("schur_free", || {
            let ctx = FiberContext::new(&disk()?, 0.5, 3)?;
            let k = [0.1, -0.05];
            let f = schur_matrix(&feshbach_operator(&ctx, 0.0, k)?, 0.3)?;
            let want = Mat2::sigma_dot([-2.0 * PI * k[0], -2.0 * PI * k[1]]).sub(&Mat2::IDENTITY.scale_re(0.3));
            let err = f.sub(&want).max_abs();
            Ok((err < 1e-12, format!("{err:e}")))
        }),
        check("config_rejects_even_grid", || {
            Ok((parse_config("[scan]\ngrid_n = 8\n").is_err(), String::new()))
        }),
        check("kernel_sample_sandwich", || {
            let s = kernel_sample(2.0)?;
            let env = 1.1 * (1.0 + (8.0 * PI).sqrt());
            Ok((s.bound_ratio >= 1.0 && s.bound_ratio <= env, format!("{}", s.bound_ratio)))
        }),
    ]
}

fn selftest(out: &mut Out) -> Result<()> {
    let checks = selftest_checks();
    for c in &checks {
        println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out.json("selftest.json", &checks)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} selftest checks failed")));
    }
    Ok(())
}
