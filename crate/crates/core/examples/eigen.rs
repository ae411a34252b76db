//! Principal eigenvalue rho(a) across a range of a, with its derivatives
//! and the sign change that defines a*.

use edwards::sturm::{principal_eigen, rho_derivative, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SolverConfig::default();
    println!(
        "{:>6} {:>16} {:>14} {:>14} {:>10}",
        "a", "rho", "rho'", "rho''", "residual"
    );
    for a in [-4.0, -2.0, 0.0, 1.0, 2.0, 2.188757, 2.5, 3.0, 4.0] {
        let s = principal_eigen(a, &cfg)?;
        let (d1, d2) = rho_derivative(a, &cfg)?;
        println!(
            "{a:>6.3} {:>16.10} {d1:>14.8} {d2:>14.8} {:>10.1e}",
            s.rho,
            s.residual()
        );
    }
    Ok(())
}
