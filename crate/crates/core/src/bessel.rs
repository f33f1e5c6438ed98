//! Bessel functions K₀, K₁, J₁ and the kernel of the free Dirac resolvent.
//!
//! K₀/K₁ use the ascending series for x ≤ 2 and Steed's continued fraction
//! above. J₁ uses Miller's backward recurrence normalized by
//! J₀ + 2ΣJ₂ₖ = 1 for |x| ≤ 25 and the Hankel expansion beyond.

use crate::error::{invalid, Result};
use crate::pauli::Mat2;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn check_positive(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("{name} requires a finite x > 0, got {x}"));
    }
    Ok(())
}

/// (K₀(x), K₁(x)) for x > 0.
pub fn bessel_k01(x: f64) -> Result<(f64, f64)> {
    check_positive(x, "bessel_k")?;
    Ok(if x <= 2.0 { k01_series(x) } else { k01_steed(x) })
}

pub fn bessel_k0(x: f64) -> Result<f64> {
    bessel_k01(x).map(|p| p.0)
}

pub fn bessel_k1(x: f64) -> Result<f64> {
    bessel_k01(x).map(|p| p.1)
}

fn k01_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let lg = (0.5 * x).ln();
    // term_k = t^k/(k!)^2 and t^k/(k!(k+1)!)
    let mut a = 1.0;
    let mut b = 1.0;
    let mut h = 0.0; // H_k
    let (mut i0, mut i1s) = (0.0, 0.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    for k in 0..60 {
        let kf = k as f64;
        let h1 = h + 1.0 / (kf + 1.0);
        i0 += a;
        i1s += b;
        s0 += h * a;
        s1 += (h + h1 - 2.0 * EULER_GAMMA) * b;
        if a < 1e-18 * i0 && k > 2 {
            break;
        }
        a *= t / ((kf + 1.0) * (kf + 1.0));
        b *= t / ((kf + 1.0) * (kf + 2.0));
        h = h1;
    }
    let i1 = 0.5 * x * i1s;
    let k0 = -(lg + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    (k0, k1)
}

fn k01_steed(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        return 0.0;
    }
    let v = if ax <= 25.0 { j1_miller(ax) } else { j1_hankel(ax) };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn j1_miller(x: f64) -> f64 {
    let mut top = (x + 20.0 + 10.0 * x.sqrt()) as usize;
    top += top % 2;
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut even_sum = 0.0;
    let mut j1 = 0.0;
    for n in (1..=top).rev() {
        let jm1 = 2.0 * n as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        let idx = n - 1;
        if idx == 1 {
            j1 = j;
        } else if idx > 0 && idx % 2 == 0 {
            even_sum += j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            even_sum *= 1e-250;
            j1 *= 1e-250;
        }
    }
    j1 / (j + 2.0 * even_sum)
}

fn j1_hankel(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        if k % 2 == 0 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            p += sign * term;
        } else {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            q += sign * term;
        }
        let odd = (2 * k + 1) as f64;
        let next = term * (mu - odd * odd) / ((k + 1) as f64 * 8.0 * x);
        if next.abs() > prev || next.abs() < 1e-18 {
            break;
        }
        prev = term.abs();
        term = next;
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Branch of the free resolvent (H₀ ± i)⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolventBranch {
    /// (H₀ + i)⁻¹ = (i/2π)(K₁(r)σ·d − K₀(r)).
    PlusI,
    /// (H₀ − i)⁻¹ = (i/2π)(K₁(r)σ·d + K₀(r)).
    MinusI,
}

/// Kernel (i/2π)(K₁(r)σ·d − K₀(r)) of the free resolvent at separation
/// r = |x − x'| along the unit direction d = (x − x')/r.
pub fn resolvent_kernel(r: f64, direction: [f64; 2]) -> Result<Mat2> {
    resolvent_kernel_branch(r, direction, ResolventBranch::PlusI)
}

pub fn resolvent_kernel_branch(
    r: f64,
    direction: [f64; 2],
    branch: ResolventBranch,
) -> Result<Mat2> {
    check_positive(r, "resolvent_kernel")?;
    let len = direction[0].hypot(direction[1]);
    if (len - 1.0).abs() > 1e-12 {
        return invalid(format!("direction must be a unit vector, |d| = {len}"));
    }
    let (k0, k1) = bessel_k01(r)?;
    let sign = match branch {
        ResolventBranch::PlusI => -1.0,
        ResolventBranch::MinusI => 1.0,
    };
    let m = Mat2::sigma_dot(direction)
        .scale_re(k1)
        .add(&Mat2::IDENTITY.scale_re(sign * k0));
    Ok(m.scale(C64::new(0.0, 1.0 / (2.0 * PI))))
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSample {
    pub r: f64,
    pub max_entry: f64,
    pub bound_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelBoundReport {
    pub samples: Vec<KernelSample>,
    /// Largest bound_ratio over the samples, the empirical C(r_max).
    pub max_ratio: f64,
    pub envelope: f64,
    pub within_envelope: bool,
    /// bound_ratio at the smallest sampled r.
    pub small_r_ratio: f64,
}

/// 2π·(max entry)·r·eʳ at a single separation.
pub fn kernel_sample(r: f64) -> Result<KernelSample> {
    let m = resolvent_kernel(r, [1.0, 0.0])?;
    let max_entry = m.max_abs();
    Ok(KernelSample {
        r,
        max_entry,
        bound_ratio: 2.0 * PI * max_entry * r * r.exp(),
    })
}

/// Samples the kernel on a log-spaced grid of separations and compares
/// 2π·|kernel|·r·eʳ with the envelope 1.1·(1 + √(2π·r_max)).
pub fn kernel_bound_check(r_min: f64, r_max: f64, samples: usize) -> Result<KernelBoundReport> {
    if !(r_min > 0.0 && r_max > r_min) {
        return invalid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]"));
    }
    if samples < 2 {
        return invalid("kernel_bound_check needs at least 2 samples");
    }
    let (l0, l1) = (r_min.ln(), r_max.ln());
    let out = (0..samples)
        .map(|i| kernel_sample((l0 + (l1 - l0) * i as f64 / (samples - 1) as f64).exp()))
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = out.iter().map(|s| s.bound_ratio).fold(0.0, f64::max);
    let envelope = 1.1 * (1.0 + (2.0 * PI * r_max).sqrt());
    Ok(KernelBoundReport {
        small_r_ratio: out[0].bound_ratio,
        max_ratio,
        envelope,
        within_envelope: max_ratio.is_finite() && max_ratio <= envelope,
        samples: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_reference_values() {
        // tabulated values
        let cases = [
            (0.5, 0.924_419_071_227_665_9, 1.656_441_120_003_300_9),
            (1.0, 0.421_024_438_240_708_3, 0.601_907_230_197_234_6),
            (2.0, 0.113_893_872_749_533_4, 0.139_865_881_816_522_4),
            (5.0, 0.003_691_098_334_042_594, 0.004_044_613_445_452_164),
        ];
        for (x, k0, k1) in cases {
            let (a, b) = bessel_k01(x).unwrap();
            assert!((a - k0).abs() < 1e-14 * k0.max(1.0), "K0({x}) = {a}");
            assert!((b - k1).abs() < 1e-14 * k1.max(1.0), "K1({x}) = {b}");
        }
    }

    #[test]
    fn k_is_continuous_across_switch() {
        let lo = bessel_k01(2.0 - 1e-14).unwrap();
        let hi = bessel_k01(2.0 + 1e-14).unwrap();
        assert!((lo.0 - hi.0).abs() < 1e-13);
        assert!((lo.1 - hi.1).abs() < 1e-13);
    }

    #[test]
    fn k_domain() {
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
    }

    #[test]
    fn j1_reference_values() {
        let cases = [
            (1.0, 0.440_050_585_744_933_5),
            (2.0, 0.576_724_807_756_873_4),
            (10.0, 0.043_472_746_168_861_44),
            (30.0, -0.118_751_062_616_623_05),
            (100.0, -0.077_145_352_014_112_3),
        ];
        for (x, v) in cases {
            assert!((bessel_j1(x) - v).abs() < 1e-12, "J1({x}) = {}", bessel_j1(x));
            assert!((bessel_j1(-x) + v).abs() < 1e-12);
        }
        assert_eq!(bessel_j1(0.0), 0.0);
    }

    #[test]
    fn j1_continuous_at_switch() {
        let a = j1_miller(25.0);
        let b = j1_hankel(25.0);
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }

    #[test]
    fn kernel_direction_flip() {
        let a = resolvent_kernel(0.7, [0.6, 0.8]).unwrap();
        let b = resolvent_kernel(0.7, [-0.6, -0.8]).unwrap();
        let (k0, _) = bessel_k01(0.7).unwrap();
        // the sum keeps only the K0 term twice
        let s = a.add(&b);
        let e = s.sub(&Mat2::IDENTITY.scale(C64::new(0.0, -k0 / PI)));
        assert!(e.max_abs() < 1e-15);
    }

    #[test]
    fn branches_differ_by_k0_term() {
        let p = resolvent_kernel_branch(1.3, [1.0, 0.0], ResolventBranch::PlusI).unwrap();
        let m = resolvent_kernel_branch(1.3, [1.0, 0.0], ResolventBranch::MinusI).unwrap();
        let k0 = bessel_k0(1.3).unwrap();
        let d = m.sub(&p).sub(&Mat2::IDENTITY.scale(C64::new(0.0, k0 / PI)));
        assert!(d.max_abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_bad_direction() {
        assert!(resolvent_kernel(1.0, [1.0, 1.0]).is_err());
        assert!(resolvent_kernel(0.0, [1.0, 0.0]).is_err());
    }
}
