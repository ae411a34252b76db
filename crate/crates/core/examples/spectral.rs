//! Profile of w(h, t) from its eigen-expansion at a few times, against
//! the leading term that governs the decay rate.

use edwards::spectral::{self, reconstruct_y, w_coefficients, w_eval, y_kernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let exp = w_coefficients(spectral::DEFAULT_TERMS)?;
    println!("{} terms, accurate for t >= {:.4}", exp.terms(), exp.t_min);
    for t in [0.5, 1.0, 2.0, 4.0] {
        println!("\nt = {t}");
        for h in [0.25, 0.5, 1.0, 2.0, 3.0] {
            let w = w_eval(h, t, &exp)?;
            println!(
                "  h = {h:<5} w = {:<14.6e} leading = {:<14.6e} tail <= {:.1e}",
                w.value,
                exp.leading(h, t),
                w.tail_bound
            );
        }
    }
    println!("\nLaplace transform in t against the Airy closed form:");
    for a in [0.0, 1.0, 2.0] {
        let (fast, exact) = (reconstruct_y(a, 1.0, &exp)?, y_kernel(a, 1.0)?);
        println!("  a = {a}: {fast:.8} vs {exact:.8}");
    }
    Ok(())
}
