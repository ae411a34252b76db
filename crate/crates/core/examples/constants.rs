//! Prints the six critical constants next to their two-decimal published
//! values, plus the eigenvalue derivatives they come from.

use edwards::constants::{compute_constants, ModelConstants};
use edwards::sturm::{self, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SolverConfig::default();
    let k = compute_constants(&cfg)?;
    let published = [2.19, 1.11, 0.63, 2.95, 0.85, 0.78];
    println!("{:<12} {:>20} {:>10}", "constant", "computed", "published");
    for ((name, v), p) in ModelConstants::names().iter().zip(k.values()).zip(published) {
        println!("{name:<12} {v:>20.12} {p:>10.2}");
    }
    let (r1, r2) = sturm::rho_derivative(k.a_star, &cfg)?;
    println!("\nrho'(a*) = {r1:.12}, rho''(a*) = {r2:.12}");
    let (r1, r2) = sturm::rho_derivative(k.a_dstar, &cfg)?;
    println!("rho'(a**) = {r1:.12}, rho''(a**) = {r2:.12}");
    Ok(())
}
