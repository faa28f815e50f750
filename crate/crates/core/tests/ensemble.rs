use rfo_core::ensemble::{run_ensemble, sweep_parameter, EnsembleObservable, ExperimentSpec, LatticeSpec, SweepParameter};
use rfo_core::fields::{Distribution, ModelParams};
use rfo_core::sampler::ChainConfig;

fn spec(side: usize, eps: f64, beta: f64, observables: Vec<EnsembleObservable>) -> ExperimentSpec {
    ExperimentSpec {
        lattice: LatticeSpec { d: 2, n: side, periodic: false },
        model: ModelParams::xy(eps, beta),
        disorder: Distribution::StandardGaussian,
        realizations: 16,
        chains: 1,
        chain: ChainConfig {
            thermalization: 500,
            measurements: 2000,
            ..ChainConfig::default()
        },
        seed: 2024,
        observables,
        trend_sigma: 5.0,
    }
}

#[test]
fn rerun_is_bit_identical() {
    let s = spec(8, 0.5, 1.0, vec![EnsembleObservable::M0E1, EnsembleObservable::ContourCount]);
    let (a, b) = (run_ensemble(&s, 1).unwrap(), run_ensemble(&s, 1).unwrap());
    for (x, y) in a.realizations.iter().zip(&b.realizations) {
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.values), bits(&y.values));
        assert_eq!(bits(&x.within), bits(&y.within));
    }
}

#[test]
fn without_disorder_realizations_differ_only_by_chain_noise() {
    let mut s = spec(8, 0.0, 1.0, vec![EnsembleObservable::Sigma0E1, EnsembleObservable::EnergyDensity]);
    s.realizations = 32;
    let st = run_ensemble(&s, 1).unwrap();
    assert_eq!(st.failures, 0);
    for o in &st.observables {
        let ratio = o.between_stderr / o.within_stderr;
        assert!((0.5..2.0).contains(&ratio), "{o:?}");
    }
    let first = &st.realizations[0];
    let again = run_ensemble(&ExperimentSpec { seed: 7, ..s.clone() }, 1).unwrap();
    assert_ne!(first.values, again.realizations[0].values);
}

#[test]
fn means_ignore_realization_order() {
    let s = spec(8, 0.5, 1.0, vec![EnsembleObservable::Pm0Sq]);
    let st = run_ensemble(&s, 1).unwrap();
    let mut values: Vec<f64> = st.realizations.iter().map(|r| r.values[0]).collect();
    values.reverse();
    let m = values.iter().sum::<f64>() / values.len() as f64;
    assert!((m - st.observables[0].mean).abs() < 1e-12);
    assert!(st.observables[0].combined_stderr >= st.observables[0].between_stderr);
}

#[test]
fn pure_model_magnetization_rises_with_beta() {
    let mut s = spec(8, 0.0, 1.0, vec![EnsembleObservable::M0E1]);
    s.chain.block_eps = Some(0.25);
    s.realizations = 4;
    let table = sweep_parameter(&s, SweepParameter::Beta, &[0.25, 0.5, 1.0, 2.0], 1).unwrap();
    for w in table.windows(2) {
        let (a, b) = (&w[0].1.observables[0], &w[1].1.observables[0]);
        assert!(b.mean >= a.mean - 2.0 * a.combined_stderr.hypot(b.combined_stderr), "{a:?} then {b:?}");
    }
}

#[test]
fn field_projection_shrinks_with_eps() {
    let s = spec(16, 0.5, 2.0, vec![EnsembleObservable::Pm0Sq]);
    let table = sweep_parameter(&s, SweepParameter::Eps, &[0.5, 0.25, 0.125], 1).unwrap();
    // Recorded on the first validated run.
    for ((_, st), base) in table.iter().zip([0.3132, 0.0773, 0.0333]) {
        let o = &st.observables[0];
        assert!((o.mean - base).abs() <= 2.0 * o.combined_stderr, "{o:?} vs {base}");
    }
    for w in table.windows(2) {
        let (a, b) = (&w[0].1.observables[0], &w[1].1.observables[0]);
        assert!(b.mean <= a.mean + 2.0 * a.combined_stderr.hypot(b.combined_stderr), "{a:?} then {b:?}");
    }
}

#[test]
fn bad_box_density_is_stable_in_size() {
    let s = spec(16, 0.5, 2.0, vec![EnsembleObservable::BadBoxDensity]);
    let table = sweep_parameter(&s, SweepParameter::N, &[16.0, 32.0, 48.0], 1).unwrap();
    let stats: Vec<_> = table.iter().map(|(_, st)| st.observables[0].clone()).collect();
    for (o, base) in stats.iter().zip([0.4971, 0.5044, 0.5380]) {
        assert!((o.mean - base).abs() <= 2.0 * o.combined_stderr, "{o:?} vs {base}");
    }
    for w in stats.windows(2) {
        let tol = 2.0 * w[0].combined_stderr.hypot(w[1].combined_stderr);
        assert!((w[0].mean - w[1].mean).abs() <= tol, "{:?}", w);
    }
}
