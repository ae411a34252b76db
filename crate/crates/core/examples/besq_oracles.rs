//! Runs each Monte Carlo oracle suite for the squared Bessel simulators
//! and prints the z-score of every check.

use edwards::besselsim::{oracle_suite, Scheme, SimConfig, Suite};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        dt: 1e-3,
        n_paths: 50_000,
        seed: 1,
        scheme: Scheme::EulerAbs,
    };
    for suite in Suite::ALL {
        for c in oracle_suite(suite, &cfg)? {
            println!(
                "{:<10} {:<22} {:>12.6} vs {:>12.6}  z = {:+.2}",
                suite.as_str(),
                c.check,
                c.estimate,
                c.target,
                c.z
            );
        }
    }
    Ok(())
}
