mod common;

use antidot::bessel::*;
use antidot::pauli::Mat2;
use common::{k0_heat, k1_heat};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn k_functions_match_heat_kernel_integral() {
    for i in 0..=40 {
        let x = 0.1 * (100f64).powf(i as f64 / 40.0);
        let (k0, k1) = bessel_k01(x).unwrap();
        let (o0, o1) = (k0_heat(x), k1_heat(x));
        assert!((k0 - o0).abs() <= 1e-8, "K0({x}) {k0} vs {o0}");
        assert!((k1 - o1).abs() <= 1e-8, "K1({x}) {k1} vs {o1}");
    }
}

#[test]
fn k0_heat_examples() {
    for x in [0.5, 1.0, 2.0, 5.0] {
        assert!((bessel_k0(x).unwrap() - k0_heat(x)).abs() <= 1e-8);
    }
}

#[test]
fn x_k1_tends_to_one() {
    let x = 1e-3;
    assert!((x * bessel_k1(x).unwrap() - 1.0).abs() <= 1e-3);
    assert!((x * k1_heat(x) - 1.0).abs() <= 1e-3);
}

#[test]
fn k_domain_errors() {
    assert!(bessel_k0(0.0).is_err());
    assert!(bessel_k1(-1.0).is_err());
    assert!(resolvent_kernel(0.0, [1.0, 0.0]).is_err());
    assert!(resolvent_kernel(1.0, [1.0, 0.1]).is_err());
}

#[test]
fn j1_at_zero() {
    assert_eq!(bessel_j1(0.0), 0.0);
}

#[test]
fn k0_derivative_is_minus_k1() {
    for i in 0..20 {
        let x = 0.1 + 9.9 * i as f64 / 19.0;
        let h = 1e-5 * x;
        let d = (bessel_k0(x + h).unwrap() - bessel_k0(x - h).unwrap()) / (2.0 * h);
        let k1 = bessel_k1(x).unwrap();
        assert!(((d + k1) / k1).abs() <= 1e-6, "x = {x}");
    }
}

#[test]
fn kernel_formula_along_x_axis() {
    let r = 0.7;
    let m = resolvent_kernel(r, [1.0, 0.0]).unwrap();
    let (k0, k1) = (bessel_k0(r).unwrap(), bessel_k1(r).unwrap());
    let want = Mat2::SIGMA1
        .scale_re(k1)
        .sub(&Mat2::IDENTITY.scale_re(k0))
        .scale(C64::new(0.0, 1.0 / (2.0 * PI)));
    assert!(m.sub(&want).max_abs() <= 1e-15);
}

#[test]
fn kernel_inverts_free_dirac_symbol_branch() {
    // Off the diagonal, (H₀ + z)K = 0 away from the source. Check
    // (−iσ·∇ + i)K = 0 for the + branch by finite differences.
    let h = 1e-4;
    let x = [0.6, -0.3];
    let k = |p: [f64; 2]| {
        let r = p[0].hypot(p[1]);
        resolvent_kernel(r, [p[0] / r, p[1] / r]).unwrap()
    };
    let dx = k([x[0] + h, x[1]]).sub(&k([x[0] - h, x[1]])).scale_re(0.5 / h);
    let dy = k([x[0], x[1] + h]).sub(&k([x[0], x[1] - h])).scale_re(0.5 / h);
    let mi = C64::new(0.0, -1.0);
    let lhs = Mat2::SIGMA1
        .mul(&dx)
        .add(&Mat2::SIGMA2.mul(&dy))
        .scale(mi)
        .add(&k(x).scale(C64::new(0.0, 1.0)));
    assert!(lhs.max_abs() < 1e-6, "{}", lhs.max_abs());
}

#[test]
fn kernel_at_one_matches_oracle_bound() {
    let m = resolvent_kernel(1.0, [0.6, 0.8]).unwrap();
    let bound = (k0_heat(1.0) + k1_heat(1.0)) / (2.0 * PI);
    assert!(m.max_abs() <= bound * (1.0 + 1e-12));
    assert!(m.max_abs() >= 0.5 * bound);
}

#[test]
fn bound_check_on_unit_range() {
    let r = kernel_bound_check(0.05, 4.0, 200).unwrap();
    assert!(r.within_envelope);
    assert!(r.max_ratio.is_finite());
    assert!((r.envelope - 1.1 * (1.0 + (8.0 * PI).sqrt())).abs() < 1e-12);
    let tiny = kernel_sample(1e-4).unwrap();
    assert!((tiny.bound_ratio - 1.0).abs() < 1e-2);
    let two = kernel_sample(2.0).unwrap();
    assert!(two.bound_ratio >= 1.0 && two.bound_ratio <= r.envelope);
}

proptest! {
    #[test]
    fn kernel_entries_bounded(r in 0.01f64..20.0, th in 0.0f64..(2.0 * PI)) {
        let d = [th.cos(), th.sin()];
        let m = resolvent_kernel(r, d).unwrap();
        let (k0, k1) = bessel_k01(r).unwrap();
        prop_assert!(m.max_abs() <= (k0 + k1) / (2.0 * PI) * (1.0 + 1e-12));
    }

    #[test]
    fn direction_flip_changes_only_k1_term(r in 0.01f64..20.0, th in 0.0f64..(2.0 * PI)) {
        let d = [th.cos(), th.sin()];
        let a = resolvent_kernel(r, d).unwrap();
        let b = resolvent_kernel(r, [-d[0], -d[1]]).unwrap();
        let k0 = bessel_k0(r).unwrap();
        // sum isolates the K₀ part, difference the K₁ part
        let sum = a.add(&b).scale_re(0.5);
        let want = Mat2::IDENTITY.scale(C64::new(0.0, -k0 / (2.0 * PI)));
        prop_assert!(sum.sub(&want).max_abs() <= 1e-12 * (1.0 + k0));
        let diff = a.sub(&b).scale_re(0.5);
        prop_assert!((diff.get(0, 0)).norm() <= 1e-12 * (1.0 + k0));
    }

    #[test]
    fn both_branches_share_the_k1_term(r in 0.05f64..10.0, th in 0.0f64..(2.0 * PI)) {
        let d = [th.cos(), th.sin()];
        let p = resolvent_kernel_branch(r, d, ResolventBranch::PlusI).unwrap();
        let m = resolvent_kernel_branch(r, d, ResolventBranch::MinusI).unwrap();
        let k1 = bessel_k1(r).unwrap();
        let want = Mat2::sigma_dot(d).scale(C64::new(0.0, k1 / (2.0 * PI)));
        prop_assert!(p.add(&m).scale_re(0.5).sub(&want).max_abs() <= 1e-12 * (1.0 + k1));
    }
}
