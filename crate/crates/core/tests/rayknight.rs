use edwards::edwardsmc::{rayknight_consistency, PolymerError, RayKnightConfig};

#[test]
fn composite_matches_direct_paths() {
    let r = rayknight_consistency(1.0, &RayKnightConfig::default()).unwrap();
    assert!(
        r.z_mean.abs() <= 3.0,
        "mean z {} ({:?} vs {:?})",
        r.z_mean,
        r.direct_mean,
        r.composite_mean
    );
    assert!(r.z_var.abs() <= 3.0, "variance z {}", r.z_var);
    assert!(r.swap_z_mean.abs() <= 1.0 && r.swap_z_var.abs() <= 1.0);
    assert!(r.acceptance >= 1e-4);
    assert!(
        r.z_weights.abs() <= 3.0,
        "{:?} vs {:?}",
        r.weights_direct,
        r.weights_composite
    );
}

#[test]
fn tight_windows_are_refused() {
    let rk = RayKnightConfig {
        time_window: 1e-4,
        level_window: 1e-4,
        conditioned_samples: 10,
        weight_samples: 10,
        max_tries: 2000,
        ..RayKnightConfig::default()
    };
    let err = rayknight_consistency(1.0, &rk).unwrap_err();
    assert!(matches!(err, PolymerError::ConditioningTooTight { .. }), "{err}");
}

#[test]
fn rejects_parameters_past_the_overshoot_threshold() {
    assert!(rayknight_consistency(3.0, &RayKnightConfig::default()).is_err());
}
