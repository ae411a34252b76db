//! Compares the intersection local time of direct polymer paths with the
//! three-piece squared Bessel construction, conditioned and weighted.

use edwards::edwardsmc::{rayknight_consistency, PolymerConfig, RayKnightConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let defaults = RayKnightConfig::default();
    let rk = RayKnightConfig {
        polymer: PolymerConfig {
            n_paths: 10_000,
            ..defaults.polymer
        },
        conditioned_samples: 500,
        weight_samples: 10_000,
        ..defaults
    };
    let r = rayknight_consistency(1.0, &rk)?;
    println!(
        "mean H:   direct {:.4} ± {:.4}, composite {:.4} ± {:.4}, z = {:+.2}",
        r.direct_mean.mean, r.direct_mean.se, r.composite_mean.mean, r.composite_mean.se, r.z_mean
    );
    println!(
        "var H:    direct {:.4}, composite {:.4}, z = {:+.2}",
        r.direct_var.0, r.composite_var.0, r.z_var
    );
    println!(
        "weights:  direct {:.4} ± {:.4}, composite {:.4} ± {:.4}, z = {:+.2}",
        r.weights_direct.mean, r.weights_direct.se, r.weights_composite.mean, r.weights_composite.se, r.z_weights
    );
    println!("acceptance {:.2e}, dropped {}", r.acceptance, r.dropped);
    Ok(())
}
