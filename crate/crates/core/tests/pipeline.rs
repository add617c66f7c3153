use quantsc::analysis::lnre;
use quantsc::btd::{btd_solve, load_factors, save_factors, BtdDims, SolverConfig};
use quantsc::dgm::{dgm_reconstruct, dgm_solve, Activation, DgmConfig, DgmVars, GeneratorNet};
use quantsc::quant::{design_bins_pooled, log_transform, quantize_map, ObservationSet, QuantizerSpec, DEFAULT_OFFSET};
use quantsc::simkit::{read_qmap, sample_fibers, write_qmap, GeneratorKind, ReplacementMode, Scenario};

fn small_btd_scenario() -> Scenario {
    Scenario {
        i: 12,
        j: 12,
        k: 6,
        r: 2,
        n_subbands: 2,
        generator: GeneratorKind::Btd,
        l: Some(2),
        ..Scenario::default_profile()
    }
}

fn spec_for(base: &Scenario, bits: u32) -> QuantizerSpec {
    let pool: Vec<Vec<f64>> = (500..505)
        .map(|s| {
            let m = base.with_seed(s).generate().unwrap().map;
            m.tensor().iter().map(|&x| log_transform(x, DEFAULT_OFFSET).unwrap()).collect()
        })
        .collect();
    let bins = design_bins_pooled(pool.iter().map(|v| v.as_slice()), bits).unwrap();
    QuantizerSpec::new(DEFAULT_OFFSET, 0.5, bins).unwrap()
}

#[test]
fn btd_pipeline_through_files() {
    let base = small_btd_scenario();
    let spec = spec_for(&base, 4);
    let truth = base.with_seed(3).generate().unwrap();
    let dir = tempfile::tempdir().unwrap();

    // every artifact survives a disk roundtrip unchanged
    let map_path = dir.path().join("truth.qmap");
    write_qmap(&map_path, truth.map.tensor()).unwrap();
    assert_eq!(&read_qmap(&map_path).unwrap(), truth.map.tensor());
    let spec_path = dir.path().join("spec.json");
    spec.save(&spec_path).unwrap();
    let spec = QuantizerSpec::load(&spec_path).unwrap();

    let omega = sample_fibers(12, 12, 72, ReplacementMode::Without, 9).unwrap();
    let obs = quantize_map(&truth.map, &omega, &spec, 10).unwrap();
    let obs_path = dir.path().join("obs.json");
    obs.save(&obs_path, 12, 12).unwrap();
    let (obs2, ni, nj) = ObservationSet::load(&obs_path).unwrap();
    assert_eq!((ni, nj), (12, 12));
    assert_eq!(obs2.symbols(), obs.symbols());

    let cfg = SolverConfig {
        max_iters: 3000,
        rel_tol: 1e-7,
        ..Default::default()
    };
    let dims = BtdDims { i: 12, j: 12, k: 6, r: 2, l: 2 };
    let sol = btd_solve(&obs2, &spec, dims, &cfg).unwrap();
    let objs = sol.trace.objectives();
    assert!(objs.last().unwrap() < &objs[0]);
    let err = lnre(&sol.map, &truth.map, DEFAULT_OFFSET).unwrap();
    assert!(err < 0.2, "LNRE {err} after {} iterations", sol.trace.iterations());

    save_factors(dir.path().join("factors"), &sol.factors).unwrap();
    let back = load_factors(dir.path().join("factors")).unwrap();
    assert_eq!(back, sol.factors);
}

#[test]
fn dgm_recovers_maps_generated_by_its_own_network() {
    let net = GeneratorNet::random(4, &[16], Activation::Relu, 8, 8, 2.0, 1).unwrap();
    let truth_vars = DgmVars::init(2, 4, 5, 2);
    let truth = dgm_reconstruct(&truth_vars, &net).unwrap();
    let logs: Vec<f64> = truth.tensor().iter().map(|&x| log_transform(x, DEFAULT_OFFSET).unwrap()).collect();
    let bins = quantsc::quant::design_bins(&logs, 4).unwrap();
    let spec = QuantizerSpec::new(DEFAULT_OFFSET, 0.5, bins).unwrap();
    let omega = sample_fibers(8, 8, 40, ReplacementMode::Without, 3).unwrap();
    let obs = quantize_map(&truth, &omega, &spec, 4).unwrap();
    let cfg = DgmConfig {
        max_iters: 600,
        rel_tol: 1e-8,
        seed: 7,
        ..Default::default()
    };
    let sol = dgm_solve(&obs, &spec, &net, 2, &cfg).unwrap();
    let start = dgm_reconstruct(&DgmVars::init(2, 4, 5, 7), &net).unwrap();
    let err = lnre(&sol.map, &truth, DEFAULT_OFFSET).unwrap();
    let err0 = lnre(&start, &truth, DEFAULT_OFFSET).unwrap();
    assert!(err < 0.5 * err0, "LNRE {err} from {err0}");
}
