use cvqkd_core::estimation::{EstimationScheme, SchemeKind};
use cvqkd_core::model::{FiberModel, ModulationParams, SourceParams};
use cvqkd_core::montecarlo::{
    component_trial_outcomes, run_trials, trial_outcomes, validate_variance_models, EmpiricalStats, TrialConfig,
    ValidationTemplate,
};

fn config(kind: SchemeKind, t: f64, trials: usize, seed: u64) -> TrialConfig {
    let fiber = FiberModel::default();
    let modulation = match kind {
        SchemeKind::Single => ModulationParams::single(3.0),
        _ => ModulationParams::double(3.0, 10.0),
    };
    let ratio = if kind == SchemeKind::Double { 0.0 } else { 0.5 };
    TrialConfig {
        channel: fiber.channel_at_transmittance(t).unwrap(),
        source: SourceParams::coherent(),
        modulation,
        scheme: EstimationScheme::new(kind, ratio).unwrap(),
        block_size: 4000,
        trials,
        seed,
    }
}

#[test]
fn component_and_aggregated_paths_agree_in_distribution() {
    for kind in SchemeKind::ALL {
        let c = config(kind, 0.2, 400, 7);
        let full = EmpiricalStats::from_outcomes(&component_trial_outcomes(&c).unwrap(), None).unwrap();
        let fast = EmpiricalStats::from_outcomes(&trial_outcomes(&c).unwrap(), None).unwrap();
        let s = c.analytic().unwrap().s();
        // means within a few standard errors, deviations within sampling noise
        let se = s / (c.trials as f64).sqrt();
        assert!((full.mean_veps - fast.mean_veps).abs() < 5.0 * se, "{kind}");
        let (a, b) = (full.std_veps.unwrap(), fast.std_veps.unwrap());
        assert!((a / b - 1.0).abs() < 0.2, "{kind}: {a} vs {b}");
    }
}

#[test]
fn deviation_converges_with_more_trials() {
    let few = run_trials(&config(SchemeKind::Single, 0.1, 100, 3)).unwrap();
    let many = run_trials(&config(SchemeKind::Single, 0.1, 4000, 3)).unwrap();
    assert!(many.rel_err_veps.unwrap() < 0.06, "{:?}", many.rel_err_veps);
    assert!(few.rel_err_veps.unwrap() < 0.4);
}

#[test]
fn estimates_are_centred() {
    for kind in SchemeKind::ALL {
        let c = TrialConfig {
            block_size: 40_000,
            ..config(kind, 0.5, 1000, 11)
        };
        let stats = run_trials(&c).unwrap();
        let model = c.analytic().unwrap();
        let n = (c.trials as f64).sqrt();
        assert!((stats.mean_t - c.channel.transmittance).abs() < 4.0 * model.sigma() / n, "{kind}");
        assert!((stats.mean_veps - c.channel.excess_noise).abs() < 4.0 * model.s() / n, "{kind}");
    }
}

#[test]
fn modified_scheme_bias_is_of_order_one_over_m() {
    let bias = |m: usize| {
        let c = TrialConfig {
            block_size: m,
            ..config(SchemeKind::ModifiedDouble, 0.5, 20_000, 5)
        };
        run_trials(&c).unwrap().mean_veps - c.channel.excess_noise
    };
    let ratio = bias(1000) / bias(4000);
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn validation_table_is_reproducible() {
    let template = ValidationTemplate {
        source: SourceParams::coherent(),
        key_variance: 3.0,
        revealed_variance: 10.0,
        ratio: 0.5,
        fiber: FiberModel::default(),
        block_size: 2000,
        trials: 50,
        seed: 9,
        schemes: SchemeKind::ALL.to_vec(),
    };
    let grid = [0.05, 0.5];
    let a = validate_variance_models(&grid, &template).unwrap();
    let b = validate_variance_models(&grid, &template).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    assert_eq!(a[0].m_or_n, 1000);
    assert_eq!(a[2].m_or_n, 2000);
    let other = validate_variance_models(&grid, &ValidationTemplate { seed: 10, ..template }).unwrap();
    assert_ne!(a, other);
}
