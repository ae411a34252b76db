//! Checks that the branch formulas for I(b) agree with a brute-force
//! Legendre transform of the moment generating function, and that
//! transforming twice gives the function back.

use edwards::rate::{grid, Rate};
use edwards::sturm::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = Rate::new(SolverConfig::default())?;
    let k = rate.constants;
    for mu in [-1.0, -k.rho_a_dstar, 0.0, 1.0, 2.0] {
        let p = rate.lambda_plus(mu)?;
        println!("Lambda+({mu:>8.5}) = {:>12.8}  [{}]", p.value, p.branch.as_str());
    }
    let bs = [0.0, 0.5, k.b_dstar, 1.0, k.b_star, 2.0, 3.0];
    let mus = grid(-k.rho_a_dstar - 1.0, 6.0, 0.05)?;
    let report = rate.legendre_check(&bs, &mus)?;
    for row in &report.rows {
        println!("{row:?}");
    }
    println!("max gap {:.2e}", report.max_gap());
    let inv = rate.involution_gap(&grid(-k.rho_a_dstar + 0.1, 5.0, 0.25)?)?;
    println!("double transform gap {inv:.2e}");
    Ok(())
}
