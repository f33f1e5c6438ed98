mod common;

use antidot::potential::*;
use common::{annulus_modes, disk_transform, hyp1_brute, square_transform};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn normalized_disk_mean() {
    let p = normalize(&MassProfile::disk(0.2, 1.0).unwrap()).unwrap();
    assert!((p.height - 1.0 / (PI.sqrt() * 0.2)).abs() < 1e-12);
    let oracle = disk_transform(0.2, [0.0, 0.0]).re * p.height;
    assert!((p.phi - oracle).abs() <= 1e-8);
    assert!((p.phi - 0.354491).abs() < 1e-6);
    let c = fourier_coeff(&p, 1.0, [0, 0]).unwrap();
    assert_eq!(c.re, p.phi);
    assert!((p.l2_norm - 1.0).abs() <= 1e-12);
}

#[test]
fn normalize_is_idempotent() {
    let p = normalize(&MassProfile::disk(0.3, 2.0).unwrap()).unwrap();
    let q = normalize(&p).unwrap();
    assert!((p.height - q.height).abs() <= 1e-12);
    assert!((p.phi - q.phi).abs() <= 1e-12);
}

#[test]
fn normalize_square() {
    let p = normalize(&MassProfile::square(0.4, 1.0).unwrap()).unwrap();
    assert!((p.height - 2.5).abs() < 1e-12);
    assert!((p.phi - 0.4).abs() < 1e-12);
}

#[test]
fn zero_profile_cannot_be_normalized() {
    assert!(normalize(&MassProfile::disk(0.2, 0.0).unwrap()).is_err());
}

#[test]
fn closed_forms_match_quadrature() {
    let mut r = common::rng(11);
    let disk = MassProfile::disk(0.2, 1.7).unwrap();
    let sq = MassProfile::square(0.6, -0.8).unwrap();
    for _ in 0..25 {
        let m = loop {
            let m = [r.gen_range(-20i64..=20), r.gen_range(-20i64..=20)];
            if ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt() <= 20.0 {
                break m;
            }
        };
        let alpha = r.gen_range(0.1..1.0);
        let xi = [alpha * m[0] as f64, alpha * m[1] as f64];
        let d = fourier_coeff(&disk, alpha, m).unwrap();
        let od = disk_transform(0.2, xi) * (1.7 * alpha * alpha);
        let scale = alpha * alpha * disk.phi;
        assert!((d - od).norm() <= 1e-6 * od.norm().max(1e-3 * scale), "disk m = {m:?}");
        let s = fourier_coeff(&sq, alpha, m).unwrap();
        let os = square_transform(0.6, xi) * (-0.8 * alpha * alpha);
        let scale = alpha * alpha * sq.phi.abs();
        assert!((s - os).norm() <= 1e-6 * os.norm().max(1e-3 * scale), "square m = {m:?}");
    }
}

#[test]
fn grid_quadrature_of_smooth_profile() {
    // χ(x) = cos²(πx₁)cos²(πx₂) sampled on the cell nodes; the trapezoid
    // rule is exact for its few Fourier modes.
    let n = 64;
    let mut v = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let x = [-0.5 + a as f64 / n as f64, -0.5 + b as f64 / n as f64];
            v.push((PI * x[0]).cos().powi(2) * (PI * x[1]).cos().powi(2));
        }
    }
    let p = MassProfile::grid(n, v, 1.0).unwrap();
    let c = |m: [i64; 2]| fourier_coeff(&p, 1.0, m).unwrap();
    assert!(close(c([0, 0]), C64::new(0.25, 0.0), 1e-14));
    assert!(close(c([1, 0]), C64::new(0.125, 0.0), 1e-14));
    assert!(close(c([1, 1]), C64::new(0.0625, 0.0), 1e-14));
    assert!(close(c([2, 0]), C64::new(0.0, 0.0), 1e-14));
    assert!(fourier_coeff(&p, 1.0, [7, 0]).unwrap().norm() < 1e-14);
    // 64 samples cannot resolve 8 points per oscillation at |m| = 9
    assert!(fourier_coeff(&p, 1.0, [9, 0]).is_err());
}

#[test]
fn annulus_example_coefficients() {
    let p = annulus_profile(40, 10).unwrap();
    assert_eq!(fourier_coeff(&p, 1.0, [40, 0]).unwrap(), C64::new(1.0, 0.0));
    assert_eq!(fourier_coeff(&p, 1.0, [24, 32]).unwrap(), C64::new(1.0, 0.0));
    assert_eq!(fourier_coeff(&p, 1.0, [0, 0]).unwrap(), C64::new(0.0, 0.0));
    assert_eq!(p.phi, 0.0);
    assert!(p.full_cell_support);
}

#[test]
fn annulus_mode_count_matches_enumeration() {
    let p = annulus_profile(4, 1).unwrap();
    let modes = annulus_modes(4, 1);
    let count = modes.len();
    assert_eq!(count, 56);
    assert!((p.l2_norm - (count as f64).sqrt()).abs() < 1e-12);
    for a in -6i64..=6 {
        for b in -6i64..=6 {
            let want = if modes.contains_key(&(a, b)) { 1.0 } else { 0.0 };
            assert_eq!(fourier_coeff(&p, 1.0, [a, b]).unwrap().re, want);
        }
    }
}

#[test]
fn hyp1_matches_brute_force() {
    let p = annulus_profile(4, 1).unwrap();
    let s = hyp1_sum(&p, 5).unwrap();
    let b = hyp1_brute(&annulus_modes(4, 1));
    assert!(b.im.abs() <= 1e-12 * b.re.abs());
    assert!((s - b.re).abs() <= 1e-10 * b.re.abs(), "{s} vs {}", b.re);
    assert!(s != 0.0);
}

#[test]
fn hyp1_single_cosine_is_zero() {
    for m0 in [(1, 0), (2, 3), (-4, 1)] {
        assert_eq!(hyp1_sum(&single_cosine(m0).unwrap(), 6).unwrap(), 0.0);
    }
}

#[test]
fn hyp1_refuses_short_cutoff() {
    assert!(hyp1_sum(&annulus_profile(4, 1).unwrap(), 4).is_err());
}

#[test]
fn hyp1_report_is_real() {
    let r = hyp1_report(&annulus_profile(4, 1).unwrap(), 5).unwrap();
    assert!(r.imag_residual <= 1e-10 * r.magnitude);
    assert_eq!(r.tail_estimate, 0.0);
}

#[test]
fn fourier_table_invariants() {
    let p = normalize(&MassProfile::disk(0.2, 1.0).unwrap()).unwrap();
    let t = FourierTable::build(&p, 0.3, 6).unwrap();
    assert_eq!(t.span(), 12);
    assert!(t.symmetry_defect() <= 1e-12);
    assert_eq!(t.get([0, 0]).im, 0.0);
    assert!((t.get([0, 0]).re - 0.09 * p.phi).abs() <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficients_are_conjugate_symmetric(
        r in 0.05f64..0.5, a in 0.05f64..1.0, h in -3.0f64..3.0,
        alpha in 0.05f64..1.0, m1 in -30i64..30, m2 in -30i64..30,
    ) {
        for p in [MassProfile::disk(r, h).unwrap(), MassProfile::square(a, h).unwrap()] {
            let c = fourier_coeff(&p, alpha, [m1, m2]).unwrap();
            let d = fourier_coeff(&p, alpha, [-m1, -m2]).unwrap();
            prop_assert!((c - d.conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn zero_mode_is_scaled_mean(r in 0.05f64..0.5, h in 0.1f64..3.0, ai in 0usize..4) {
        let alpha = [0.1, 0.25, 0.5, 1.0][ai];
        let p = MassProfile::disk(r, h).unwrap();
        let c = fourier_coeff(&p, alpha, [0, 0]).unwrap();
        prop_assert!((c.re - alpha * alpha * p.phi).abs() <= 1e-10);
        prop_assert_eq!(c.im, 0.0);
    }

    #[test]
    fn normalized_profiles_have_unit_l2(r in 0.05f64..0.5, h in 0.1f64..10.0) {
        let p = normalize(&MassProfile::disk(r, h).unwrap()).unwrap();
        prop_assert!((p.l2_norm - 1.0).abs() <= 1e-12);
        prop_assert!(p.normalized);
    }

    #[test]
    fn hyp1_is_cubic_in_height(ci in 0usize..2, n in 3i64..6) {
        let c = [0.5, 2.0][ci];
        let p = annulus_profile(n, 1).unwrap();
        let cutoff = (n + 1) as usize;
        let s1 = hyp1_sum(&p, cutoff).unwrap();
        let sc = hyp1_sum(&p.with_height(c).unwrap(), cutoff).unwrap();
        prop_assert!((sc - c * c * c * s1).abs() <= 1e-10 * (c * c * c * s1).abs());
    }
}
