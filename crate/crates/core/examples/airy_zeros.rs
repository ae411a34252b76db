//! First ten zeros of Ai with the slopes Ai'(a_k), and the scaled
//! eigenvalues a^(k) = 2^(1/3) a_k of the half-line Airy operator.

use edwards::airy::airy_zeros;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = airy_zeros(10)?;
    println!("{:>3} {:>20} {:>20} {:>20}", "k", "a_k", "Ai'(a_k)", "a^(k)");
    for (k, (z, s)) in table.zeros.iter().zip(&table.slopes).enumerate() {
        println!("{k:>3} {z:>20.15} {s:>20.15} {:>20.15}", 2f64.cbrt() * z);
    }
    Ok(())
}
