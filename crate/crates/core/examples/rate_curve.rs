//! Samples the rate function I(b) on [0, 4], marking where the linear
//! branch hands over to the convex one, and the strength-beta rescaling.

use edwards::rate::Rate;
use edwards::sturm::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = Rate::new(SolverConfig::default())?;
    let k = rate.constants;
    println!("b** = {:.6}, b* = {:.6}, a* = {:.6}", k.b_dstar, k.b_star, k.a_star);
    println!(
        "{:>6} {:>14} {:>14} {:>8} {:>14}",
        "b", "I(b)", "I'(b)", "branch", "I_2(b)"
    );
    for p in rate.rate_curve(0.0, 4.0, 0.25)?.points {
        let scaled = rate.beta_scaled(2.0, p.b)?.value;
        println!(
            "{:>6.2} {:>14.8} {:>14.8} {:>8} {scaled:>14.8}",
            p.b,
            p.value,
            p.derivative,
            p.branch.as_str()
        );
    }
    Ok(())
}
