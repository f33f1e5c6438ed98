//! Mass profiles χ on the unit cell Ω = (−1/2, 1/2]², their norms, Fourier
//! coefficients of the scaled profile χ_α(x) = χ(x/α), and the
//! triple sum.
//!
//! For compactly supported χ the scaled coefficients follow from the
//! continuous transform: χ̂_α(m) = α²·F[χ](α m).

use crate::bessel::bessel_j1;
use crate::error::{invalid, numerical, Result};
use crate::fft2::{next_smooth, Fft2};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Geometry of χ before the height factor is applied.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Indicator of the centered disk of radius r.
    Disk { r: f64 },
    /// Indicator of the centered square of side a.
    Square { a: f64 },
    /// Trigonometric polynomial Σ c_m e^{2πi m·x}.
    Modes { coeffs: BTreeMap<(i64, i64), C64> },
    /// Samples on the nodes x_j = −1/2 + j/n, row index along x₁.
    Grid { n: usize, values: Vec<f64> },
    /// χ ≡ 1 on the whole plane; χ̂_α = δ₀ for every α.
    Constant,
}

#[derive(Clone, Debug)]
pub struct MassProfile {
    pub shape: Shape,
    pub height: f64,
    pub phi: f64,
    pub l1_norm: f64,
    pub l2_norm: f64,
    pub linf_norm: f64,
    pub normalized: bool,
    /// True when χ is not compactly supported inside Ω, so only α = 1 is valid.
    pub full_cell_support: bool,
}

/// Unit-height norms (Φ, ‖·‖₁, ‖·‖₂, ‖·‖∞) for each shape.
fn unit_norms(shape: &Shape) -> Result<(f64, f64, f64, f64)> {
    Ok(match shape {
        Shape::Disk { r } => {
            if !(*r > 0.0 && *r <= 0.5) {
                return invalid(format!("disk radius must lie in (0, 1/2], got {r}"));
            }
            let area = PI * r * r;
            (area, area, area.sqrt(), 1.0)
        }
        Shape::Square { a } => {
            if !(*a > 0.0 && *a <= 1.0) {
                return invalid(format!("square side must lie in (0, 1], got {a}"));
            }
            (a * a, a * a, *a, 1.0)
        }
        Shape::Constant => (1.0, 1.0, 1.0, 1.0),
        Shape::Grid { n, values } => {
            if *n < 2 || values.len() != n * n {
                return invalid(format!(
                    "grid profile needs n*n samples with n >= 2, got n = {n}, {} values",
                    values.len()
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return invalid("grid profile contains non-finite samples");
            }
            let cnt = values.len() as f64;
            let phi = values.iter().sum::<f64>() / cnt;
            let l1 = values.iter().map(|v| v.abs()).sum::<f64>() / cnt;
            let l2 = (values.iter().map(|v| v * v).sum::<f64>() / cnt).sqrt();
            let linf = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (phi, l1, l2, linf)
        }
        Shape::Modes { coeffs } => {
            for (&(a, b), c) in coeffs {
                let partner = coeffs.get(&(-a, -b)).copied().unwrap_or_default();
                if (partner - c.conj()).norm() > 1e-12 * c.norm().max(1.0) {
                    return invalid(format!(
                        "mode coefficients must satisfy c(-m) = conj(c(m)); fails at m = ({a}, {b})"
                    ));
                }
            }
            let phi = coeffs.get(&(0, 0)).map(|c| c.re).unwrap_or(0.0);
            let l2 = coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let samples = sample_modes(coeffs);
            let cnt = samples.len() as f64;
            let l1 = samples.iter().map(|v| v.abs()).sum::<f64>() / cnt;
            let linf = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (phi, l1, l2, linf)
        }
    })
}

fn modes_extent(coeffs: &BTreeMap<(i64, i64), C64>) -> i64 {
    coeffs
        .iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(&(a, b), _)| a.abs().max(b.abs()))
        .max()
        .unwrap_or(0)
}

/// Values of a trigonometric polynomial on a uniform periodic grid that
/// contains x = 0, fine enough to resolve every mode 8 times over.
fn sample_modes(coeffs: &BTreeMap<(i64, i64), C64>) -> Vec<f64> {
    sample_modes_at(coeffs, 0)
}

fn sample_modes_at(coeffs: &BTreeMap<(i64, i64), C64>, min_samples: usize) -> Vec<f64> {
    let ext = modes_extent(coeffs) as usize;
    let n = 2 * next_smooth((4 * ext).max(32).max(min_samples.div_ceil(2)));
    let fft = Fft2::new(n);
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    let wrap = |m: i64| m.rem_euclid(n as i64) as usize;
    // inverse_t expects the transposed layout [k2][k1]
    for (&(a, b), c) in coeffs {
        data[wrap(b) * n + wrap(a)] += c;
    }
    let mut scratch = fft.scratch();
    fft.inverse_t(&mut data, &mut scratch);
    data.iter().map(|z| z.re).collect()
}

impl MassProfile {
    pub fn new(shape: Shape, height: f64) -> Result<Self> {
        if !height.is_finite() {
            return invalid("profile height must be finite");
        }
        let (phi, l1, l2, linf) = unit_norms(&shape)?;
        let h = height.abs();
        let full_cell_support = matches!(shape, Shape::Modes { .. } | Shape::Constant);
        Ok(MassProfile {
            shape,
            height,
            phi: height * phi,
            l1_norm: h * l1,
            l2_norm: h * l2,
            linf_norm: h * linf,
            normalized: false,
            full_cell_support,
        })
    }

    pub fn disk(r: f64, height: f64) -> Result<Self> {
        Self::new(Shape::Disk { r }, height)
    }

    pub fn square(a: f64, height: f64) -> Result<Self> {
        Self::new(Shape::Square { a }, height)
    }

    pub fn constant(height: f64) -> Result<Self> {
        Self::new(Shape::Constant, height)
    }

    pub fn modes(coeffs: BTreeMap<(i64, i64), C64>, height: f64) -> Result<Self> {
        Self::new(Shape::Modes { coeffs }, height)
    }

    pub fn grid(n: usize, values: Vec<f64>, height: f64) -> Result<Self> {
        Self::new(Shape::Grid { n, values }, height)
    }

    /// The profile with the same shape and a new height.
    pub fn with_height(&self, height: f64) -> Result<Self> {
        let mut p = Self::new(self.shape.clone(), height)?;
        p.normalized = self.normalized && height == self.height;
        Ok(p)
    }

    /// Largest |m|∞ carrying a nonzero coefficient, for band-limited profiles.
    pub fn mode_extent(&self) -> Option<i64> {
        match &self.shape {
            Shape::Modes { coeffs } => Some(modes_extent(coeffs)),
            Shape::Constant => Some(0),
            _ => None,
        }
    }

    pub fn shape_name(&self) -> &'static str {
        match self.shape {
            Shape::Disk { .. } => "disk",
            Shape::Square { .. } => "square",
            Shape::Modes { .. } => "modes",
            Shape::Grid { .. } => "grid",
            Shape::Constant => "constant",
        }
    }

    /// Pointwise √|χ|, multiplied by sgn χ when `signed`.
    pub fn sqrt_abs(&self, signed: bool) -> Result<MassProfile> {
        self.sqrt_abs_sampled(signed, 0)
    }

    /// As [`MassProfile::sqrt_abs`]; mode profiles are sampled on at least
    /// `min_samples` points per axis.
    pub fn sqrt_abs_sampled(&self, signed: bool, min_samples: usize) -> Result<MassProfile> {
        let sh = self.height.signum();
        let root = self.height.abs().sqrt();
        let h = if signed { sh * root } else { root };
        match &self.shape {
            Shape::Disk { .. } | Shape::Square { .. } | Shape::Constant => {
                Self::new(self.shape.clone(), h)
            }
            Shape::Grid { n, values } => {
                let v = values
                    .iter()
                    .map(|x| {
                        let s = if signed { x.signum() * sh } else { 1.0 };
                        s * (x.abs() * self.height.abs()).sqrt()
                    })
                    .collect();
                Self::new(Shape::Grid { n: *n, values: v }, 1.0)
            }
            Shape::Modes { coeffs } => {
                let samples = sample_modes_at(coeffs, min_samples);
                let n = (samples.len() as f64).sqrt().round() as usize;
                // reorder from the FFT grid (x = j/n) to cell nodes x = −1/2 + j/n
                let shift = n / 2;
                let mut v = vec![0.0; n * n];
                for a in 0..n {
                    for b in 0..n {
                        let x = samples[((a + shift) % n) * n + (b + shift) % n] * self.height;
                        let s = if signed { x.signum() } else { 1.0 };
                        v[a * n + b] = s * x.abs().sqrt();
                    }
                }
                let mut p = Self::new(Shape::Grid { n, values: v }, 1.0)?;
                p.full_cell_support = true;
                Ok(p)
            }
        }
    }
}

/// Rescales the height so that ‖χ‖₂ = 1.
pub fn normalize(profile: &MassProfile) -> Result<MassProfile> {
    if !(profile.l2_norm > 0.0) {
        return invalid("cannot normalize a profile with zero L2 norm");
    }
    if profile.normalized {
        return Ok(profile.clone());
    }
    let scale = 1.0 / profile.l2_norm;
    let mut p = profile.clone();
    p.height *= scale;
    p.phi *= scale;
    p.l1_norm *= scale;
    p.l2_norm = 1.0;
    p.linf_norm *= scale;
    p.normalized = true;
    Ok(p)
}

/// Unit-coefficient trigonometric polynomial over the lattice annulus
/// N − width ≤ |m| ≤ N + width.
pub fn annulus_profile(n: i64, width: i64) -> Result<MassProfile> {
    if !(width >= 1 && n > width) {
        return invalid(format!("annulus needs N > width >= 1, got N = {n}, width = {width}"));
    }
    let (lo, hi) = ((n - width).pow(2), (n + width).pow(2));
    let mut coeffs = BTreeMap::new();
    let r = n + width;
    for a in -r..=r {
        for b in -r..=r {
            let q = a * a + b * b;
            if q >= lo && q <= hi {
                coeffs.insert((a, b), C64::new(1.0, 0.0));
            }
        }
    }
    MassProfile::modes(coeffs, 1.0)
}

/// Profile whose only nonzero coefficients are χ̂(±m₀) = 1, i.e. 2cos(2π m₀·x).
pub fn single_cosine(m0: (i64, i64)) -> Result<MassProfile> {
    if m0 == (0, 0) {
        return invalid("single cosine needs m0 != 0");
    }
    let mut coeffs = BTreeMap::new();
    coeffs.insert(m0, C64::new(1.0, 0.0));
    coeffs.insert((-m0.0, -m0.1), C64::new(1.0, 0.0));
    MassProfile::modes(coeffs, 1.0)
}

fn check_alpha(profile: &MassProfile, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    if matches!(profile.shape, Shape::Modes { .. }) && alpha != 1.0 {
        return invalid("mode profiles fill the whole cell and only admit alpha = 1");
    }
    if profile.full_cell_support && matches!(profile.shape, Shape::Grid { .. }) && alpha != 1.0 {
        return invalid("this sampled profile fills the whole cell and only admits alpha = 1");
    }
    Ok(())
}

/// sin(π a ξ)/(π ξ), with value a at ξ = 0.
fn sinc_side(a: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        a
    } else {
        (PI * a * xi).sin() / (PI * xi)
    }
}

/// Σ_j s_j e^{−2πi α m·x_j}/n² with x_j = −1/2 + j/n (separable sum).
fn grid_coeff(n: usize, values: &[f64], alpha: f64, m: [i64; 2]) -> Result<C64> {
    let mmax = m[0].abs().max(m[1].abs()) as f64;
    if mmax > 0.0 && (n as f64) / (alpha * mmax) < 8.0 {
        return invalid(format!(
            "grid of {n} samples is too coarse for m = ({}, {}) at alpha = {alpha}: \
             need at least 8 samples per oscillation",
            m[0], m[1]
        ));
    }
    let phase = |mi: i64, j: usize| {
        let x = -0.5 + j as f64 / n as f64;
        C64::from_polar(1.0, -2.0 * PI * alpha * mi as f64 * x)
    };
    let e2: Vec<C64> = (0..n).map(|j| phase(m[1], j)).collect();
    let mut acc = C64::new(0.0, 0.0);
    for j1 in 0..n {
        let row = &values[j1 * n..(j1 + 1) * n];
        let inner: C64 = row.iter().zip(&e2).map(|(s, e)| e * *s).sum();
        acc += phase(m[0], j1) * inner;
    }
    Ok(acc / (n * n) as f64)
}

/// Fourier coefficient χ̂_α(m) = ∫_Ω e^{−2πi m·x} χ(x/α) dx.
pub fn fourier_coeff(profile: &MassProfile, alpha: f64, m: [i64; 2]) -> Result<C64> {
    check_alpha(profile, alpha)?;
    let h = profile.height;
    let a2 = alpha * alpha;
    Ok(match &profile.shape {
        Shape::Disk { r } => {
            let rho = alpha * ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            let v = if rho == 0.0 {
                PI * r * r
            } else {
                r * bessel_j1(2.0 * PI * r * rho) / rho
            };
            C64::new(h * a2 * v, 0.0)
        }
        Shape::Square { a } => {
            let v = sinc_side(*a, alpha * m[0] as f64) * sinc_side(*a, alpha * m[1] as f64);
            C64::new(h * a2 * v, 0.0)
        }
        Shape::Constant => {
            if m == [0, 0] {
                C64::new(h, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }
        Shape::Modes { coeffs } => coeffs.get(&(m[0], m[1])).copied().unwrap_or_default() * h,
        Shape::Grid { n, values } => grid_coeff(*n, values, alpha, m)? * (h * a2),
    })
}

/// Coefficients χ̂_α(d) for all |d|∞ ≤ 2M, the differences m − m' that
/// occur between plane waves of a cutoff-M basis.
#[derive(Clone, Debug)]
pub struct FourierTable {
    pub cutoff: usize,
    pub alpha: f64,
    span: i64,
    data: Vec<C64>,
}

impl FourierTable {
    pub fn build(profile: &MassProfile, alpha: f64, cutoff: usize) -> Result<Self> {
        check_alpha(profile, alpha)?;
        if cutoff < 1 {
            return invalid("Fourier table cutoff must be >= 1");
        }
        let span = 2 * cutoff as i64;
        let w = (2 * span + 1) as usize;
        let mut data = vec![C64::new(0.0, 0.0); w * w];
        match &profile.shape {
            Shape::Grid { n, values } => {
                if (*n as f64) / (alpha * span as f64) < 8.0 {
                    return invalid(format!(
                        "grid of {n} samples is too coarse for differences up to {span} at \
                         alpha = {alpha}: need at least 8 samples per oscillation"
                    ));
                }
                // separable evaluation, O(n²·w + n·w²)
                let n = *n;
                let ph = |mi: i64, j: usize| {
                    let x = -0.5 + j as f64 / n as f64;
                    C64::from_polar(1.0, -2.0 * PI * alpha * mi as f64 * x)
                };
                let mut partial = vec![C64::new(0.0, 0.0); n * w];
                for j1 in 0..n {
                    let row = &values[j1 * n..(j1 + 1) * n];
                    for (b, m2) in (-span..=span).enumerate() {
                        partial[j1 * w + b] =
                            row.iter().enumerate().map(|(j2, s)| ph(m2, j2) * *s).sum();
                    }
                }
                let scale = profile.height * alpha * alpha / (n * n) as f64;
                for (a, m1) in (-span..=span).enumerate() {
                    let e1: Vec<C64> = (0..n).map(|j1| ph(m1, j1)).collect();
                    for b in 0..w {
                        let s: C64 = (0..n).map(|j1| e1[j1] * partial[j1 * w + b]).sum();
                        data[a * w + b] = s * scale;
                    }
                }
            }
            _ => {
                for (a, m1) in (-span..=span).enumerate() {
                    for (b, m2) in (-span..=span).enumerate() {
                        data[a * w + b] = fourier_coeff(profile, alpha, [m1, m2])?;
                    }
                }
            }
        }
        // enforce χ̂(−d) = conj χ̂(d) exactly so assembled matrices are Hermitian
        let last = data.len() - 1;
        for i in 0..=last / 2 {
            let j = last - i;
            let avg = (data[i] + data[j].conj()) * 0.5;
            data[i] = avg;
            data[j] = avg.conj();
        }
        Ok(FourierTable { cutoff, alpha, span, data })
    }

    /// Largest |d|∞ stored.
    pub fn span(&self) -> i64 {
        self.span
    }

    pub fn get(&self, d: [i64; 2]) -> C64 {
        let w = 2 * self.span + 1;
        debug_assert!(d[0].abs() <= self.span && d[1].abs() <= self.span);
        self.data[((d[0] + self.span) * w + d[1] + self.span) as usize]
    }

    /// Rows (m1, m2, re, im) in lexicographic order.
    pub fn rows(&self) -> Vec<(i64, i64, f64, f64)> {
        let mut out = Vec::with_capacity(self.data.len());
        for m1 in -self.span..=self.span {
            for m2 in -self.span..=self.span {
                let z = self.get([m1, m2]);
                out.push((m1, m2, z.re, z.im));
            }
        }
        out
    }

    /// Max over stored d of |χ̂(−d) − conj χ̂(d)|.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m1 in -self.span..=self.span {
            for m2 in -self.span..=self.span {
                let e = self.get([-m1, -m2]) - self.get([m1, m2]).conj();
                worst = worst.max(e.norm());
            }
        }
        worst
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Hyp1Report {
    pub value: f64,
    pub imag_residual: f64,
    /// Σ of |term| over the accumulated terms.
    pub magnitude: f64,
    pub cutoff: usize,
    /// Σ_{|m|∞>cutoff} |χ̂(m)|²·max|χ̂|/|m|² over a band of width cutoff; zero
    /// for band-limited profiles. Advisory only.
    pub tail_estimate: f64,
    pub phi: f64,
    pub terms: usize,
}

/// S(χ) = Σ_{m≠0} Σ_{m'≠0} (m·m')/(|m|²|m'|²)·conj χ̂(m)·χ̂(m')·χ̂(m − m').
pub fn hyp1_sum(profile: &MassProfile, cutoff: usize) -> Result<f64> {
    hyp1_report(profile, cutoff).map(|r| r.value)
}

pub fn hyp1_report(profile: &MassProfile, cutoff: usize) -> Result<Hyp1Report> {
    if let Some(ext) = profile.mode_extent() {
        if ext as usize > cutoff {
            return invalid(format!(
                "triple-sum cutoff {cutoff} is smaller than the mode support {ext}; \
                 truncation would change S"
            ));
        }
    }
    let c = cutoff.max(1);
    let table = FourierTable::build(profile, 1.0, c)?;
    let ci = c as i64;
    let mut support = Vec::new();
    for a in -ci..=ci {
        for b in -ci..=ci {
            let v = table.get([a, b]);
            if (a, b) != (0, 0) && v.norm() > 0.0 {
                let q = (a * a + b * b) as f64;
                support.push(([a, b], v, [a as f64 / q, b as f64 / q]));
            }
        }
    }
    let mut acc = C64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    let mut terms = 0usize;
    for &(m, cm, um) in &support {
        let cmc = cm.conj();
        for &(mp, cmp, ump) in &support {
            let d = table.get([m[0] - mp[0], m[1] - mp[1]]);
            if d.norm() == 0.0 {
                continue;
            }
            let w = um[0] * ump[0] + um[1] * ump[1];
            let t = cmc * cmp * d * w;
            acc += t;
            magnitude += t.norm();
            terms += 1;
        }
    }
    if acc.im.abs() > 1e-10 * magnitude.max(f64::MIN_POSITIVE) {
        return numerical(format!(
            "triple-sum accumulation is not real: Im = {:e}, magnitude = {:e}",
            acc.im, magnitude
        ));
    }
    let tail_estimate = if profile.mode_extent().is_some() {
        0.0
    } else {
        let big = &table;
        let maxc = (-2 * ci..=2 * ci)
            .flat_map(|a| (-2 * ci..=2 * ci).map(move |b| (a, b)))
            .map(|(a, b)| big.get([a, b]).norm())
            .fold(0.0, f64::max);
        let mut t = 0.0;
        for a in -2 * ci..=2 * ci {
            for b in -2 * ci..=2 * ci {
                if a.abs().max(b.abs()) > ci {
                    t += big.get([a, b]).norm_sqr() / (a * a + b * b) as f64;
                }
            }
        }
        t * maxc
    };
    Ok(Hyp1Report {
        value: acc.re,
        imag_residual: acc.im,
        magnitude,
        cutoff: c,
        tail_estimate,
        phi: profile.phi,
        terms,
    })
}
