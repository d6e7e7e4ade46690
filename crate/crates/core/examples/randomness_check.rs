//! When `X rho X` does not depend on the unit cotangent `X`, no locally
//! unbiased measurement beats the random bound.

use qcrb::model::{classical_model, fisher, qubit_full};
use qcrb::randcheck::{check_randomness, qubit_identity_check, DEFAULT_TOL};

fn main() -> qcrb::Result<()> {
    let qubit = qubit_full(0.3)?;
    let r = check_randomness(&qubit, &fisher(&qubit)?, DEFAULT_TOL)?;
    println!("qubit: random {} (residual {:.2e})", r.is_random, r.max_residual);
    println!("K = {}", r.k.matrix());
    println!("worst L rho L - (I - rho) over 100 directions: {:.2e}", qubit_identity_check(0.3, 100, 7)?);

    let third = 1.0 / 3.0;
    let classical = classical_model(&[third, third, third], &[vec![0.1, -0.1, 0.0], vec![0.1, 0.1, -0.2]])?;
    let r = check_randomness(&classical, &fisher(&classical)?, DEFAULT_TOL)?;
    println!("classical: random {} (residual {:.2e})", r.is_random, r.max_residual);
    Ok(())
}
