//! Cutting-plane solution of the dual problem over all locally unbiased
//! measurements, followed by recovery of a measurement from the multipliers.
//!
//! Slow in debug builds; use `cargo run --release --example dual_certificate`.

use qcrb::duallp::{dual_bound, qubit_certificate, recover_measurement, s_top_eigenvalue, DualOptions};
use qcrb::model::{fisher, qubit_full, WeightForm};
use qcrb::randbound::random_bound;

fn main() -> qcrb::Result<()> {
    let model = qubit_full(0.5)?;
    let f = fisher(&model)?;
    let g = WeightForm::identity(3);

    let solve = dual_bound(&model, &f, &g, DualOptions::default())?;
    let cert = &solve.certificate;
    println!("status {:?} after {} rounds", solve.status, cert.rounds);
    println!("dual value     {:.10}", cert.spur);
    println!("random bound   {:.10}", random_bound(&f.j, g.matrix())?);
    println!("margin {:.3e}, repair shift {:.3e}", cert.feasibility_margin, solve.repair_shift);
    println!("lambda_max(S) {:.3e}", s_top_eigenvalue(&cert.s));

    let closed = qubit_certificate(&model, &f, &g)?;
    println!("closed-form certificate {:.10} (margin {:.3e})", closed.spur, closed.feasibility_margin);

    let rec = recover_measurement(&model, &g, &solve.cuts, &solve.cut_weights);
    println!(
        "recovered {} elements: POVM residual {:.2e}, unbiasedness residual {:.2e}, deviation {:.10}",
        rec.elements.len(),
        rec.povm_residual,
        rec.unbiasedness_residual,
        rec.deviation
    );
    println!("{}", qcrb::io::to_json(&cert.to_json()));
    Ok(())
}
