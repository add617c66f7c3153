use ndarray::Array3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::quant::normal::std_cdf;
use crate::quant::{compute_constants_on, MRange};

fn map(values: Vec<f64>, dims: (usize, usize, usize)) -> RadioMap {
    RadioMap::new(Array3::from_shape_vec(dims, values).unwrap()).unwrap()
}

fn profile() -> BoundParams {
    BoundParams {
        i: 51,
        j: 51,
        k: 64,
        n: 260,
        r: 6,
        l: 10,
        d: 256,
        p: 10.0,
        q: 16.0,
        beta: 10.0,
        kappa: 10.0,
        alpha: 60.0,
        a: 1e-6,
        delta: 0.05,
        nu: 0.0,
    }
}

#[test]
fn lnre_identity_and_hand_value() {
    let a = 1e-6;
    let e = std::f64::consts::E;
    let truth = map(vec![1.0 - a, e * e - a], (1, 1, 2));
    let est = map(vec![e - a, 1.0 - a], (1, 1, 2));
    assert_eq!(lnre(&truth, &truth, a).unwrap(), 0.0);
    // h(truth) = (0, 2), h(est) = (1, 0): (1 + 4) / 4
    assert!((lnre(&est, &truth, a).unwrap() - 1.25).abs() < 1e-12);
}

#[test]
fn lnre_errors() {
    let a = 1e-6;
    let ones = map(vec![1.0 - a; 2], (1, 1, 2));
    let other = map(vec![1.0; 4], (1, 2, 2));
    assert!(lnre(&other, &ones, a).is_err());
    assert!(matches!(lnre(&ones, &ones, a), Err(Error::Degenerate(_))));
}

#[test]
fn lnre_ignores_joint_fiber_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
    let e: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
    let base = lnre(&map(e.clone(), (2, 3, 4)), &map(t.clone(), (2, 3, 4)), 1e-6).unwrap();
    // reverse the six fibers of both tensors
    let rev = |v: &[f64]| -> Vec<f64> { v.chunks(4).rev().flatten().copied().collect() };
    let permuted = lnre(&map(rev(&e), (2, 3, 4)), &map(rev(&t), (2, 3, 4)), 1e-6).unwrap();
    assert!((base - permuted).abs() < 1e-14);
}

#[test]
fn tau_btd_reference_value() {
    let p = profile();
    let (ij, k, l, r) = (102.0f64, 64.0f64, 10.0f64, 6.0f64);
    let oracle = 3.0 * ((ij * l + k) * (3.0 * r.sqrt() * 20.0f64).ln()).sqrt()
        + 3.0 * (k * 5.0f64.ln() + ij * l * 10.0f64.ln()).sqrt();
    let v = tau_btd(&p).unwrap();
    assert!((v - oracle).abs() < 1e-10);
    assert!((v - 369.188_074_230_879_1).abs() < 1e-9);
}

#[test]
fn tau_btd_properties() {
    let p = profile();
    let base = tau_btd(&p).unwrap();
    assert!(tau_btd(&BoundParams { l: 20, ..p }).unwrap() > base);
    let swapped = BoundParams { i: 30, j: 70, ..p };
    let orig = BoundParams { i: 70, j: 30, ..p };
    assert_eq!(tau_btd(&swapped).unwrap(), tau_btd(&orig).unwrap());
    // κ = 2 removes the ln(κ/2) contribution
    let k2 = BoundParams { kappa: 2.0, ..p };
    let expected = 3.0
        * ((((102 * 10 + 64) as f64) * (3.0 * 6f64.sqrt() * 12.0).ln()).sqrt()
            + (1020.0 * 10f64.ln()).sqrt());
    assert!((tau_btd(&k2).unwrap() - expected).abs() < 1e-10);
    assert!(tau_btd(&BoundParams { beta: 0.0, ..p }).is_err());
}

#[test]
fn tau_dgm_reference_value() {
    let p = profile();
    let sr = 6f64.sqrt();
    let oracle = 3.0 * (64.0 * (1.5 * sr * 10.0 * 20.0f64).ln() + 256.0 * (3.0 * sr * 10.0 * 16.0 * 20.0f64).ln()).sqrt();
    let v = tau_dgm(&p).unwrap();
    assert!((v - oracle).abs() < 1e-10);
    assert!((v - 164.292_673_855_984_3).abs() < 1e-9);
    assert!(tau_dgm(&BoundParams { p: 20.0, ..p }).unwrap() > v);
    let k_only = 3.0 * (64.0 * (1.5 * sr * 10.0 * 20.0f64).ln()).sqrt();
    assert!((tau_dgm(&BoundParams { d: 0, ..p }).unwrap() - k_only).abs() < 1e-12);
    assert_eq!(tau_dgm(&BoundParams { i: 3, j: 99, ..p }).unwrap(), v);
}

#[test]
fn covering_numbers() {
    let p = BoundParams {
        i: 2,
        j: 2,
        k: 3,
        l: 1,
        r: 2,
        d: 5,
        p: 2.0,
        q: 1.5,
        beta: 3.0,
        kappa: 4.0,
        ..profile()
    };
    assert!((log_covering_btd(&p, 0.5).unwrap() - 74.979_216_576_510_94).abs() < 1e-10);
    assert!((log_covering_dgm(&p, 0.5).unwrap() - 86.038_074_751_533_78).abs() < 1e-10);
    assert!(log_covering_btd(&p, 0.1).unwrap() > log_covering_btd(&p, 0.5).unwrap());
    assert!(log_covering_dgm(&p, 0.1).unwrap() > log_covering_dgm(&p, 0.5).unwrap());
    let none = BoundParams { r: 0, ..p };
    assert_eq!(log_covering_btd(&none, 0.5).unwrap(), 0.0);
    assert_eq!(log_covering_dgm(&none, 0.5).unwrap(), 0.0);
    assert!(log_covering_btd(&p, 0.0).is_err());
}

fn profile_constants() -> LinkConstants {
    let spec = QuantizerSpec::new(1e-6, 1.7, vec![-8.0, -5.0, -2.0]).unwrap();
    crate::quant::compute_constants(&spec, 60.0).unwrap()
}

#[test]
fn bound_quarters_to_half() {
    let p = profile();
    let c = profile_constants();
    let tau = tau_btd(&p).unwrap();
    for n in [1usize, 7, 260, 10_000, 123_457] {
        let b1 = error_bound(&p.with_n(n), tau, &c).unwrap();
        let b4 = error_bound(&p.with_n(4 * n), tau, &c).unwrap();
        assert_eq!(b1 / b4, 2.0, "N = {n}");
    }
}

#[test]
fn bound_formula_and_monotonicity() {
    let p = profile();
    let c = profile_constants();
    let tau = 5.0;
    let c1 = 4.0 * (p.alpha + p.a).powi(2) / c.f_alpha;
    let c2 = c.l_alpha / p.a;
    let n = p.n as f64;
    let oracle = 8.0 * c1 * c2 * 6.0 / 64.0 * (6.0 / n).sqrt()
        + c.u_alpha * c1 * ((20.0f64).ln() / (2.0 * n)).sqrt()
        + c.u_alpha * c1 * (8.0 * (40.0f64).ln() / n).sqrt();
    let b = error_bound(&p, tau, &c).unwrap();
    assert!((b - oracle).abs() < 1e-12 * oracle);

    assert!(error_bound(&p.with_n(1000), tau, &c).unwrap() < b);
    assert!(error_bound(&BoundParams { nu: 0.1, ..p }, tau, &c).unwrap() > b);
    assert!(error_bound(&p, tau + 1.0, &c).unwrap() > b);
    let bigger_u = LinkConstants {
        u_alpha: c.u_alpha * 2.0,
        ..c
    };
    assert!(error_bound(&p, tau, &bigger_u).unwrap() > b);
    assert!(error_bound(&BoundParams { delta: 0.5, ..p }, tau, &c).is_err());
    // the N-dependent part vanishes
    let far = error_bound(&p.with_n(usize::MAX / 8), tau, &c).unwrap();
    assert!(far < 1e-3 * b);
}

#[test]
fn kl_closed_form() {
    let spec = QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap();
    let truth = Array3::zeros((1, 1, 1));
    let est = Array3::ones((1, 1, 1));
    let d = empirical_kl(&est, &truth, &spec).unwrap();
    let (lo, hi) = (std_cdf(-1.0), std_cdf(1.0));
    let kl = 0.5 * (0.5 / lo).ln() + 0.5 * (0.5 / hi).ln();
    let h2 = (lo.sqrt() - 0.5f64.sqrt()).powi(2) + (hi.sqrt() - 0.5f64.sqrt()).powi(2);
    assert!((d.kl - kl).abs() < 1e-14);
    assert!((d.kl - 0.313_740_531_456_411_2).abs() < 1e-12);
    assert!((d.hellinger2 - h2).abs() < 1e-14);

    let same = empirical_kl(&truth, &truth, &spec).unwrap();
    assert_eq!((same.kl, same.hellinger2), (0.0, 0.0));
    assert!(empirical_kl(&Array3::zeros((1, 1, 2)), &truth, &spec).is_err());
}

/// Random transformed tensors with entries in `[lo, hi]`.
fn random_pair(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (Array3<f64>, Array3<f64>) {
    let mut draw = || Array3::from_shape_simple_fn((2, 2, 3), || rng.random_range(lo..=hi));
    let x = draw();
    (x, draw())
}

#[test]
fn hellinger_sandwich_on_valid_range() {
    let spec = QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap();
    let c = compute_constants_on(&spec, MRange::Explicit(-1.0, 1.0), 10_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let (e, t) = random_pair(&mut rng, -1.0, 1.0);
        let d = empirical_kl(&e, &t, &spec).unwrap();
        let mse = (&e - &t).mapv(|v| v * v).mean().unwrap();
        assert!(c.f_alpha / 4.0 * mse <= d.hellinger2 + 1e-15);
        assert!(d.hellinger2 <= d.kl + 1e-15);
    }
}

proptest! {
    #[test]
    fn hellinger_below_kl(seed in any::<u64>(), sigma2 in 0.2f64..3.0) {
        let spec = QuantizerSpec::new(1e-6, sigma2, vec![-2.0, -0.5, 0.3, 1.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, t) = random_pair(&mut rng, -6.0, 6.0);
        let d = empirical_kl(&e, &t, &spec).unwrap();
        prop_assert!(d.hellinger2 >= 0.0);
        prop_assert!(d.hellinger2 <= d.kl + 1e-12);
    }

    #[test]
    fn lnre_is_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 3.0).collect();
        let e: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 3.0).collect();
        prop_assert!(lnre(&map(e, (2, 2, 2)), &map(t, (2, 2, 2)), 1e-6).unwrap() >= 0.0);
    }
}
