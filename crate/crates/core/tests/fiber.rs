mod common;

use antidot::fiber::*;
use antidot::linalg::dot;
use antidot::potential::{fourier_coeff, normalize, MassProfile};
use common::{constant_mass_spectrum, rand_vec, rng};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn disk() -> MassProfile {
    normalize(&MassProfile::disk(0.2, 1.0).unwrap()).unwrap()
}

fn dense_op(p: &MassProfile, alpha: f64, beta: f64, k: [f64; 2], m: usize) -> FiberOperator {
    FiberContext::new(p, alpha, m).unwrap().operator(beta, k, true, 1024.0).unwrap()
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn dense_matrix_is_hermitian() {
    let op = dense_op(&disk(), 0.3, 0.7, [0.13, -0.41], 5);
    let h = op.dense().unwrap();
    let n = op.dim();
    let mut top = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            top = top.max(h[(i, j)].norm());
            defect = defect.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    assert!(defect <= 1e-13 * top, "{defect:e}");
}

#[test]
fn blocks_follow_the_plane_wave_formula() {
    let p = disk();
    let (alpha, beta, k) = (0.4, 0.3, [0.2, 0.1]);
    let op = dense_op(&p, alpha, beta, k, 3);
    let h = op.dense().unwrap();
    let b = op.basis;
    for i in 0..b.waves() {
        for j in 0..b.waves() {
            let (mi, mj) = (b.m(i), b.m(j));
            let c = fourier_coeff(&p, alpha, [mi[0] - mj[0], mi[1] - mj[1]]).unwrap() * beta;
            let mut want = [[C64::new(0.0, 0.0); 2]; 2];
            want[0][0] = c;
            want[1][1] = -c;
            if i == j {
                let v = [2.0 * PI * (mi[0] as f64 - k[0]), 2.0 * PI * (mi[1] as f64 - k[1])];
                want[0][1] += C64::new(v[0], -v[1]);
                want[1][0] += C64::new(v[0], v[1]);
            }
            for s in 0..2 {
                for t in 0..2 {
                    assert!((h[(2 * i + s, 2 * j + t)] - want[s][t]).norm() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn zero_mode_block() {
    let p = disk();
    let (alpha, beta, k) = (0.3, 0.2, [0.05, -0.1]);
    let op = dense_op(&p, alpha, beta, k, 4);
    let z = op.basis.zero();
    let blk = op.block(z, z);
    let mass = alpha * alpha * beta * p.phi;
    assert!((blk.get(0, 0).re - mass).abs() < 1e-14);
    assert!((blk.get(1, 1).re + mass).abs() < 1e-14);
    assert!((blk.get(1, 0) - C64::new(-2.0 * PI * k[0], -2.0 * PI * k[1])).norm() < 1e-14);
}

#[test]
fn matrix_free_matches_dense() {
    let mut r = rng(3);
    for (alpha, beta, k, m) in [
        (0.3, 0.2, [0.0, 0.0], 4usize),
        (0.5, 1.3, [0.5, -0.25], 6),
        (1.0, 0.05, [-0.31, 0.22], 7),
    ] {
        let op = dense_op(&disk(), alpha, beta, k, m);
        for _ in 0..20 {
            let x = rand_vec(&mut r, op.dim());
            let a = op.dense_apply(&x).unwrap();
            let b = op.apply(&x);
            assert!(max_abs_diff(&a, &b) <= 1e-12 * vnorm(&a), "{:e}", max_abs_diff(&a, &b));
        }
    }
}

#[test]
fn matrix_free_is_hermitian() {
    let mut r = rng(5);
    let ctx = FiberContext::new(&MassProfile::square(0.5, 2.0).unwrap(), 0.6, 9).unwrap();
    let op = ctx.operator(0.8, [0.1, 0.3], false, 0.0).unwrap();
    for _ in 0..10 {
        let u = rand_vec(&mut r, op.dim());
        let v = rand_vec(&mut r, op.dim());
        let a = dot(&u, &op.apply(&v));
        let b = dot(&v, &op.apply(&u)).conj();
        assert!((a - b).norm() <= 1e-12 * vnorm(&u) * vnorm(&v) * op.norm_estimate());
    }
}

#[test]
fn free_dispersion() {
    let k = [0.17, -0.23];
    let s = eigenvalues_dense(&dense_op(&disk(), 0.5, 0.0, k, 3)).unwrap();
    let want = constant_mass_spectrum(3, k, 0.0);
    assert!(s.eigenvalues.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn free_spectrum_at_zero_has_double_zero() {
    let s = eigenvalues_dense(&dense_op(&disk(), 0.5, 0.0, [0.0, 0.0], 2)).unwrap();
    assert_eq!(s.eigenvalues.iter().filter(|x| x.abs() < 1e-10).count(), 2);
    assert_eq!(s.method, SpectrumMethod::Dense);
}

#[test]
fn constant_mass_dispersion() {
    let p = MassProfile::constant(2.5).unwrap();
    for k in [[0.0, 0.0], [0.3, -0.12], [-0.5, 0.5]] {
        let s = eigenvalues_dense(&dense_op(&p, 1.0, 0.2, k, 4)).unwrap();
        let want = constant_mass_spectrum(4, k, 0.5);
        let err = s.eigenvalues.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err:e}");
    }
    let s = eigenvalues_dense(&dense_op(&p, 1.0, 0.2, [0.0, 0.0], 4)).unwrap();
    assert!((s.min_abs() - 0.5).abs() <= 1e-10);
}

#[test]
fn spectrum_sums_to_zero() {
    let op = dense_op(&MassProfile::square(0.3, 4.0).unwrap(), 0.8, 0.9, [0.2, 0.4], 5);
    let s = eigenvalues_dense(&op).unwrap();
    let sum: f64 = s.eigenvalues.iter().sum();
    assert!(sum.abs() <= 1e-9 * op.norm_estimate());
    assert!(s.residual_bound <= 1e-10 * op.norm_estimate());
    assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn memory_guard_refuses_large_dense() {
    let ctx = FiberContext::new(&disk(), 0.3, 20).unwrap();
    let e = ctx.operator(0.2, [0.0, 0.0], true, 10.0).unwrap_err();
    assert!(e.to_string().contains("iterative"));
    assert!(ctx.operator(0.2, [0.0, 0.0], false, 10.0).is_ok());
}

#[test]
fn zone_and_sign_guards() {
    let ctx = FiberContext::new(&disk(), 0.3, 2).unwrap();
    assert!(ctx.operator(0.2, [0.6, 0.0], false, 0.0).is_err());
    assert!(ctx.operator(-0.2, [0.0, 0.0], false, 0.0).is_err());
}

#[test]
fn q0_free_block_is_bounded_below_by_pi() {
    let b = Basis::new(6);
    let mut r = rng(9);
    let smallest = |k: [f64; 2]| {
        (0..b.waves())
            .filter(|&i| i != b.zero())
            .map(|i| {
                let m = b.m(i);
                2.0 * PI * (m[0] as f64 - k[0]).hypot(m[1] as f64 - k[1])
            })
            .fold(f64::INFINITY, f64::min)
    };
    for _ in 0..200 {
        let k = [r.gen_range(-0.5..=0.5), r.gen_range(-0.5..=0.5)];
        assert!(smallest(k) >= PI - 1e-12);
    }
    assert!((smallest([0.5, 0.0]) - PI).abs() < 1e-12);
    // the same bound from the dense Q₀ restriction at the zone edge
    let op = dense_op(&disk(), 0.5, 0.0, [0.5, 0.0], 3);
    let sv = antidot::feshbach::q0_smallest_singular(&op, 0.0).unwrap();
    assert!((sv - PI).abs() < 1e-10);
}

#[test]
fn iterative_agrees_with_dense() {
    let mut r = rng(21);
    for case in 0..6 {
        let alpha = r.gen_range(0.25..0.6);
        let beta = r.gen_range(0.05..0.5);
        let k = [r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)];
        let m = 5 + case;
        let op = dense_op(&disk(), alpha, beta, k, m);
        let d = eigenvalues_dense(&op).unwrap();
        let mut want = d.eigenvalues.clone();
        want.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        want.truncate(4);
        want.sort_by(f64::total_cmp);
        let it = eigenvalues_near_zero(&op, 4).unwrap();
        assert_eq!(it.method, SpectrumMethod::IterativeInterior);
        for (a, b) in it.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-8 * b.abs(), "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn iterative_free_zero_modes() {
    let ctx = FiberContext::new(&disk(), 0.5, 8).unwrap();
    let op = ctx.operator(0.0, [0.0, 0.0], false, 0.0).unwrap();
    let s = eigenvalues_near_zero(&op, 2).unwrap();
    assert!(s.eigenvalues.iter().all(|x| x.abs() <= 1e-9));
}

#[test]
fn iterative_constant_mass() {
    let ctx = FiberContext::new(&MassProfile::constant(1.0).unwrap(), 1.0, 10).unwrap();
    let op = ctx.operator(0.5, [0.0, 0.0], false, 0.0).unwrap();
    let s = eigenvalues_near_zero(&op, 2).unwrap();
    assert!((s.eigenvalues[0] + 0.5).abs() <= 1e-8);
    assert!((s.eigenvalues[1] - 0.5).abs() <= 1e-8);
    assert!(s.residual_bound <= 1e-8 * op.norm_estimate());
}

#[test]
fn iterative_count_guard() {
    let ctx = FiberContext::new(&disk(), 0.5, 2).unwrap();
    let op = ctx.operator(0.1, [0.0, 0.0], false, 0.0).unwrap();
    assert!(eigenvalues_near_zero(&op, 1).is_err());
}

fn sorted_eigs(p: &MassProfile, alpha: f64, beta: f64, k: [f64; 2], m: usize) -> (Vec<f64>, f64) {
    let op = dense_op(p, alpha, beta, k, m);
    (eigenvalues_dense(&op).unwrap().eigenvalues, op.norm_estimate())
}

#[test]
fn charge_conjugation_brute_force_small() {
    let p = MassProfile::square(0.7, 1.3).unwrap();
    let k = [0.21, -0.37];
    let (a, nrm) = sorted_eigs(&p, 0.9, 0.6, k, 2);
    let (b, _) = sorted_eigs(&p, 0.9, 0.6, [-k[0], -k[1]], 2);
    for (x, y) in a.iter().zip(b.iter().rev()) {
        assert!((x + y).abs() <= 1e-9 * nrm);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn charge_conjugation_symmetry(
        alpha in 0.2f64..1.0, beta in 0.0f64..1.0,
        k1 in -0.5f64..0.5, k2 in -0.5f64..0.5, r in 0.05f64..0.5,
    ) {
        let p = MassProfile::disk(r, 1.0).unwrap();
        let (a, nrm) = sorted_eigs(&p, alpha, beta, [k1, k2], 6);
        let (b, _) = sorted_eigs(&p, alpha, beta, [-k1, -k2], 6);
        for (x, y) in a.iter().zip(b.iter().rev()) {
            prop_assert!((x + y).abs() <= 1e-9 * nrm);
        }
    }

    #[test]
    fn spectrum_at_zero_is_symmetric(alpha in 0.2f64..1.0, beta in 0.0f64..1.0, a in 0.1f64..1.0) {
        let p = MassProfile::square(a, 1.0).unwrap();
        let (e, nrm) = sorted_eigs(&p, alpha, beta, [0.0, 0.0], 4);
        for (x, y) in e.iter().zip(e.iter().rev()) {
            prop_assert!((x + y).abs() <= 1e-9 * nrm);
        }
    }
}
