use edwards::edwardsmc::{scaling_collapse, PolymerConfig, WeightedPaths};

fn at(t: f64, seed: u64) -> PolymerConfig {
    PolymerConfig {
        t,
        seed,
        ..PolymerConfig::default()
    }
}

#[test]
fn standardized_endpoint_has_unit_variance() {
    // Centering and scale come from an independent run; measuring them on
    // the same sample would make the variance exactly one.
    let calib = WeightedPaths::new(&at(8.0, 101)).unwrap().estimate().unwrap();
    let (b, c) = (calib.endpoint_mean, calib.endpoint_sd);
    let v = WeightedPaths::new(&at(8.0, 202)).unwrap().standardized_variance(b, c);
    assert!((v - 1.0).abs() <= 0.25, "variance {v} with b = {b}, c = {c}");
}

#[test]
fn weighted_endpoint_is_symmetric() {
    let paths = WeightedPaths::new(&PolymerConfig {
        n_paths: 50_000,
        ..at(6.0, 3)
    })
    .unwrap();
    let (skew, se) = paths.skewness();
    assert!(skew.abs() <= 3.0 * se, "{skew} ± {se}");
}

#[test]
fn free_energy_scales_as_beta_two_thirds() {
    let cfg = PolymerConfig {
        n_paths: 40_000,
        ..at(6.0, 5)
    };
    let report = scaling_collapse(&[0.5, 1.0, 2.0], &cfg).unwrap();
    assert!(report.max_abs_z() <= 3.0, "{report:?}");
    assert!((report.exponent - 2.0 / 3.0).abs() <= 0.15, "{}", report.exponent);
}

#[test]
fn log_z_never_exceeds_zero() {
    for seed in 1..4 {
        let paths = WeightedPaths::new(&PolymerConfig {
            n_paths: 2000,
            ..at(2.0, seed)
        })
        .unwrap();
        assert!(paths.log_z().0 <= 0.0);
        assert!(paths.log_weights.iter().all(|l| *l <= 0.0));
    }
}
