//! Direct Monte Carlo of the Edwards polymer at a few horizons, with the
//! free energy and endpoint speed extrapolated to infinite T.

use edwards::constants::constants;
use edwards::edwardsmc::{extrapolate_inverse_t, sample_polymer, PolymerConfig};
use edwards::sturm::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = constants(&SolverConfig::default())?;
    let ts = [4.0, 6.0, 8.0];
    let mut rates = Vec::new();
    let mut speeds = Vec::new();
    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>8}",
        "T", "-logZ/T", "E|B|/T", "sd/sqrtT", "ESS"
    );
    for t in ts {
        let e = sample_polymer(&PolymerConfig {
            t,
            n_paths: 30_000,
            ..PolymerConfig::default()
        })?;
        println!(
            "{t:>4} {:>10.4} {:>10.4} {:>10.4} {:>8.0}",
            e.rate_at_t, e.endpoint_mean, e.endpoint_sd, e.ess
        );
        rates.push(e.rate_at_t);
        speeds.push(e.endpoint_mean);
    }
    let (rate, _) = extrapolate_inverse_t(&ts, &rates);
    let (speed, _) = extrapolate_inverse_t(&ts, &speeds);
    println!(
        "T -> inf: -logZ/T ~ {rate:.3} (a* = {:.4}), E|B|/T ~ {speed:.3} (b* = {:.4})",
        k.a_star, k.b_star
    );
    Ok(())
}
