use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::optim::OptimizerKind;
use crate::quant::{design_bins, nll_entry, quantize_map, QuantizerSpec};
use crate::simkit::{sample_fibers, ReplacementMode};

fn random_factors(d: BtdDims, seed: u64) -> BtdFactors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array3::from_shape_simple_fn((d.r, d.i, d.l), || rng.random_range(0.2..1.0));
    let b = Array3::from_shape_simple_fn((d.r, d.j, d.l), || rng.random_range(0.2..1.0));
    let c = Array2::from_shape_simple_fn((d.k, d.r), || rng.random_range(0.2..1.0));
    BtdFactors::new(a, b, c).unwrap()
}

fn dims(i: usize, j: usize, k: usize, r: usize, l: usize) -> BtdDims {
    BtdDims { i, j, k, r, l }
}

/// Quantized observations of `truth` at `n` random fibers.
fn observe(truth: &BtdFactors, n: usize, bits: u32, sigma2: f64, seed: u64) -> (ObservationSet, QuantizerSpec) {
    let d = truth.dims();
    let map = truth.to_map().unwrap();
    let logs: Vec<f64> = map.tensor().iter().map(|x| (x + 1e-6).ln()).collect();
    let bins = design_bins(&logs, bits).unwrap();
    let spec = QuantizerSpec::new(1e-6, sigma2, bins).unwrap();
    let omega = sample_fibers(d.i, d.j, n, ReplacementMode::Without, seed).unwrap();
    (quantize_map(&map, &omega, &spec, seed + 1).unwrap(), spec)
}

fn no_reg() -> SolverConfig {
    SolverConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..Default::default()
    }
}

#[test]
fn all_ones_rank_one_slf() {
    let d = dims(3, 4, 2, 2, 1);
    let a = Array3::ones((2, 3, 1));
    let b = Array3::ones((2, 4, 1));
    let c = ndarray::array![[1.0, 2.0], [0.5, 0.0]];
    let f = BtdFactors::new(a, b, c).unwrap();
    assert_eq!(f.dims(), d);
    assert!(f.slf(1).iter().all(|&v| v == 1.0));
    let x = btd_predict(&f, &[(0, 0), (2, 3)]).unwrap();
    assert_eq!(x, ndarray::array![[3.0, 0.5], [3.0, 0.5]]);
}

#[test]
fn prediction_matches_quadruple_loop_and_compose() {
    let d = dims(5, 4, 3, 2, 3);
    let f = random_factors(d, 3);
    let locs: Vec<(usize, usize)> = (0..d.i).flat_map(|i| (0..d.j).map(move |j| (i, j))).collect();
    let x = btd_predict(&f, &locs).unwrap();
    let map = f.to_map().unwrap();
    for (n, &(i, j)) in locs.iter().enumerate() {
        for k in 0..d.k {
            let mut oracle = 0.0;
            for r in 0..d.r {
                for l in 0..d.l {
                    oracle += f.a()[[r, i, l]] * f.b()[[r, j, l]] * f.c()[[k, r]];
                }
            }
            assert!((x[[n, k]] - oracle).abs() < 1e-12);
            assert!((map.tensor()[[i, j, k]] - oracle).abs() < 1e-12);
        }
    }
    assert!(btd_predict(&f, &[(5, 0)]).is_err());
}

#[test]
fn factor_validation() {
    let ok = random_factors(dims(2, 2, 2, 1, 1), 0);
    assert!(BtdFactors::new(ok.a().clone(), ok.b().clone(), Array2::zeros((2, 2))).is_err());
    let mut neg = ok.a().clone();
    neg[[0, 0, 0]] = -1.0;
    assert!(BtdFactors::new(neg, ok.b().clone(), ok.c().clone()).is_err());
}

#[test]
fn objective_is_entrywise_sum() {
    let d = dims(3, 3, 2, 1, 2);
    let f = random_factors(d, 11);
    let (obs, spec) = observe(&f, 6, 2, 1.0, 4);
    let pred = btd_predict(&f, obs.omega().locations()).unwrap();
    let mut oracle = 0.0;
    for n in 0..obs.n_fibers() {
        for k in 0..d.k {
            oracle += nll_entry(obs.symbols()[[n, k]], pred[[n, k]], &spec).value;
        }
    }
    let cfg = no_reg();
    let obj = btd_objective(&f, &obs, &spec, &cfg).unwrap();
    assert!((obj - oracle).abs() < 1e-12 * oracle.abs().max(1.0));

    let with_c = SolverConfig {
        lambda3: 1.0,
        ..cfg
    };
    let c2: f64 = f.c().iter().map(|v| v * v).sum();
    let obj2 = btd_objective(&f, &obs, &spec, &with_c).unwrap();
    assert!((obj2 - obj - c2).abs() < 1e-12 * obj2);
}

#[test]
fn no_observations_no_regularizer_zero_gradient() {
    let d = dims(3, 3, 2, 2, 2);
    let f = random_factors(d, 2);
    let spec = QuantizerSpec::new(1e-6, 1.0, vec![0.0]).unwrap();
    let empty = ObservationSet::new(
        crate::simkit::SampleSet::new(vec![], ReplacementMode::Without, 3, 3).unwrap(),
        Array2::zeros((0, 2)),
        2,
    )
    .unwrap();
    let g = btd_gradients(&f, &empty, &spec, &no_reg()).unwrap();
    assert!(g.a.iter().chain(g.b.iter()).chain(g.c.iter()).all(|&v| v == 0.0));

    let cfg = SolverConfig {
        lambda1: 0.3,
        lambda2: 0.2,
        lambda3: 0.1,
        ..Default::default()
    };
    let g = btd_gradients(&f, &empty, &spec, &cfg).unwrap();
    assert_eq!(g.a, f.a() * 0.6);
    assert_eq!(g.b, f.b() * 0.4);
    assert_eq!(g.c, f.c() * 0.2);
}

/// Central difference of the objective along one coordinate of one block.
fn central_diff(
    f: &BtdFactors,
    block: usize,
    idx: usize,
    obs: &ObservationSet,
    spec: &QuantizerSpec,
    cfg: &SolverConfig,
) -> f64 {
    let x0 = f.block_slices()[block][idx];
    let h = 1e-6 * x0.abs().max(1.0);
    let eval = |x: f64| {
        let mut g = f.clone();
        g.block_slices_mut()[block][idx] = x;
        btd_objective(&g, obs, spec, cfg).unwrap()
    };
    (eval(x0 + h) - eval(x0 - h)) / (2.0 * h)
}

#[test]
fn gradients_match_finite_differences() {
    let d = dims(4, 4, 3, 1, 2);
    let f = random_factors(d, 21);
    let (obs, spec) = observe(&f, 10, 3, 0.8, 8);
    let cfg = SolverConfig::default();
    let g = btd_gradients(&f, &obs, &spec, &cfg).unwrap();
    let blocks = [g.c.as_slice().unwrap(), g.a.as_slice().unwrap(), g.b.as_slice().unwrap()];
    for (bi, grad) in blocks.iter().enumerate() {
        for (idx, &an) in grad.iter().enumerate() {
            let fd = central_diff(&f, bi, idx, &obs, &spec, &cfg);
            let scale = an.abs().max(fd.abs()).max(1e-3);
            assert!((an - fd).abs() / scale < 1e-4, "block {bi}[{idx}]: {an} vs {fd}");
        }
    }
}

#[test]
fn permuting_components_keeps_objective() {
    let d = dims(4, 5, 3, 3, 2);
    let f = random_factors(d, 5);
    let (obs, spec) = observe(&f, 8, 2, 1.0, 2);
    let perm = [2usize, 0, 1];
    let a = Array3::from_shape_fn((3, 4, 2), |(r, i, l)| f.a()[[perm[r], i, l]]);
    let b = Array3::from_shape_fn((3, 5, 2), |(r, j, l)| f.b()[[perm[r], j, l]]);
    let c = Array2::from_shape_fn((3, 3), |(k, r)| f.c()[[k, perm[r]]]);
    let g = BtdFactors::new(a, b, c).unwrap();
    let cfg = SolverConfig::default();
    let x = btd_objective(&f, &obs, &spec, &cfg).unwrap();
    let y = btd_objective(&g, &obs, &spec, &cfg).unwrap();
    assert!((x - y).abs() < 1e-10 * x);
}

#[test]
fn rescaling_a_against_c_keeps_prediction() {
    let d = dims(3, 3, 4, 2, 2);
    let f = random_factors(d, 9);
    let t = 3.7;
    let mut a = f.a().clone();
    a.index_axis_mut(ndarray::Axis(0), 1).mapv_inplace(|v| v * t);
    let mut c = f.c().clone();
    c.column_mut(1).mapv_inplace(|v| v / t);
    let g = BtdFactors::new(a, f.b().clone(), c).unwrap();
    let locs = [(0, 0), (1, 2), (2, 1)];
    let x = btd_predict(&f, &locs).unwrap();
    let y = btd_predict(&g, &locs).unwrap();
    assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12 * p.max(1.0)));
}

#[test]
fn solver_projects_and_is_deterministic() {
    let d = dims(8, 8, 5, 2, 2);
    let truth = random_factors(d, 1);
    let (obs, spec) = observe(&truth, 20, 3, 1.0, 3);
    let cfg = SolverConfig {
        max_iters: 40,
        seed: 4,
        ..Default::default()
    };
    let a = btd_solve(&obs, &spec, d, &cfg).unwrap();
    let b = btd_solve(&obs, &spec, d, &cfg).unwrap();
    assert_eq!(a.trace.objectives(), b.trace.objectives());
    assert_eq!(a.factors, b.factors);
    let f = &a.factors;
    assert!(f.a().iter().chain(f.b().iter()).chain(f.c().iter()).all(|&v| v >= 0.0));
    assert_eq!(a.map.dims(), (8, 8, 5));
    let obj = a.trace.objectives();
    assert!(obj.last().unwrap() < &obj[0]);
}

#[test]
fn plain_gd_trace_is_monotone() {
    let d = dims(6, 6, 4, 1, 2);
    let truth = random_factors(d, 12);
    let (obs, spec) = observe(&truth, 12, 2, 1.0, 6);
    let cfg = SolverConfig {
        optimizer: OptimizerKind::PlainGd,
        max_iters: 60,
        rel_tol: 1e-9,
        ..Default::default()
    };
    let sol = btd_solve(&obs, &spec, d, &cfg).unwrap();
    let obj = sol.trace.objectives();
    assert!(obj.len() > 2);
    assert!(obj.windows(2).all(|w| w[1] <= w[0]), "{obj:?}");
}

#[test]
fn solve_rejects_mismatched_inputs() {
    let d = dims(6, 6, 4, 1, 2);
    let truth = random_factors(d, 12);
    let (obs, spec) = observe(&truth, 12, 2, 1.0, 6);
    assert!(btd_solve(&obs, &spec, dims(6, 6, 5, 1, 2), &SolverConfig::default()).is_err());
    assert!(btd_solve(&obs, &spec, dims(3, 3, 4, 1, 2), &SolverConfig::default()).is_err());
    let bad = SolverConfig {
        step_c: 0.0,
        ..Default::default()
    };
    assert!(btd_solve(&obs, &spec, d, &bad).is_err());
}

#[test]
fn factor_files_roundtrip() {
    let f = random_factors(dims(4, 3, 5, 2, 2), 7);
    let dir = tempfile::tempdir().unwrap();
    save_factors(dir.path(), &f).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["R"], 2);
    assert_eq!(manifest["K"], 5);
    assert_eq!(load_factors(dir.path()).unwrap(), f);
}
