use cvqkd_core::estimation::{expected_bounds, ConfidenceBounds, EstimationScheme, SchemeKind};
use cvqkd_core::model::{FiberModel, ModulationParams, ProtocolParams, SourceParams};
use cvqkd_core::optimizer::{optimize_seeded, OptimizationProblem};
use cvqkd_core::secrecy::{
    finite_key_rate, finite_key_rate_with_counts, finite_size_correction, theoretical_key_rate_limit,
    KeyRateOptions, LimitSource, QuadraturePolicy,
};

#[test]
fn rate_assembly_matches_its_parts() {
    let channel = FiberModel::default().channel_at_distance(20.0).unwrap();
    let source = SourceParams::new(0.5).unwrap();
    let params = ProtocolParams::new(source, ModulationParams::double(4.0, 10.0), 1e7, 0.2).unwrap();
    let bounds = expected_bounds(&channel, &source, &params.modulation, &params.scheme(), 1e7, params.delta).unwrap();
    let r = finite_key_rate(&params, &channel, &bounds, KeyRateOptions::default()).unwrap();
    assert_eq!(r.scheme, SchemeKind::ModifiedDouble);
    assert_eq!((r.n, r.m), (0.8e7, 1e7));
    let delta = finite_size_correction(0.8e7, params.delta_star).unwrap();
    assert!((r.k - 0.8 * (r.k_inf_worst - delta)).abs() < 1e-15);
    assert!(r.k_inf_worst <= r.k_inf);
    assert!((r.k_inf_worst - (params.beta * r.i_ab - r.chi_be)).abs() < 1e-12);
}

#[test]
fn exact_bounds_recover_the_asymptotic_rate() {
    let channel = FiberModel::default().channel_at_distance(30.0).unwrap();
    let params =
        ProtocolParams::new(SourceParams::coherent(), ModulationParams::single(3.0), 1e9, 0.0).unwrap();
    let bounds = ConfidenceBounds::exact(&channel);
    let r = finite_key_rate_with_counts(&params, &channel, &bounds, KeyRateOptions::default(), 1e9, 0.0).unwrap();
    assert_eq!(r.k_inf, r.k_inf_worst);
    assert!((r.k - (r.k_inf - r.delta_n)).abs() < 1e-15);
}

#[test]
fn limit_dominates_optimised_schemes() {
    let fiber = FiberModel::default();
    for d in [10.0, 40.0] {
        let channel = fiber.channel_at_distance(d).unwrap();
        for vs in [1.0, 0.1] {
            let source = SourceParams::new(vs).unwrap();
            let limit =
                theoretical_key_rate_limit(&channel, 1e7, 0.95, 1e-10, LimitSource::Given(source), QuadraturePolicy::Auto)
                    .unwrap();
            let strong =
                theoretical_key_rate_limit(&channel, 1e7, 0.95, 1e-10, LimitSource::InfiniteSqueezing, QuadraturePolicy::Auto)
                    .unwrap();
            for scheme in SchemeKind::ALL {
                let best = optimize_seeded(&OptimizationProblem::new(scheme, channel, source, 1e7)).unwrap();
                assert!(best.rate <= limit.k_th, "{scheme} d={d} V_S={vs}");
                assert!(best.rate <= strong.k_th);
            }
        }
    }
}

#[test]
fn wider_confidence_never_helps() {
    let channel = FiberModel::default().channel_at_distance(15.0).unwrap();
    let source = SourceParams::coherent();
    let params = ProtocolParams::new(source, ModulationParams::single(2.0), 1e7, 0.5).unwrap();
    let scheme = EstimationScheme::single(0.5).unwrap();
    let mut last = f64::INFINITY;
    for delta in [1e-2, 1e-6, 1e-10, 1e-14] {
        let bounds = expected_bounds(&channel, &source, &params.modulation, &scheme, 1e7, delta).unwrap();
        let k = finite_key_rate(&params, &channel, &bounds, KeyRateOptions::default()).unwrap().k;
        assert!(k <= last);
        last = k;
    }
}
