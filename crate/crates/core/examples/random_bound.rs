//! Closed-form bound over random measurements and the plan that attains it.
//!
//! Each branch measures one SLD observable; the plan picks branch `i` with
//! probability `W_i` and rescales the outcome by `1 / W_i`.

use qcrb::model::{fisher, qubit_full, WeightForm};
use qcrb::randbound::{build_plan, plan_covariance, random_report};

fn main() -> qcrb::Result<()> {
    let model = qubit_full(0.5)?;
    let f = fisher(&model)?;
    let g = WeightForm::new(qcrb::linalg::RMat::from_row_slice(
        3,
        3,
        &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5],
    ))?;

    let report = random_report(&f.j, g.matrix())?;
    println!("random bound {:.10}", report.bound);
    println!("SLD bound    {:.10}", f.sld_bound(g.matrix()));
    println!("W = {}", report.w);

    let plan = build_plan(&model, &f, &g)?;
    for (i, b) in plan.branches.iter().enumerate() {
        println!(
            "branch {i}: prob {:.6}, direction {:?}, eigenvalues {:?}",
            b.prob, b.direction, b.observable.eigenvalues
        );
    }
    let v = plan_covariance(&plan);
    println!("tr(g V) = {:.10}", (g.matrix() * &v).trace());
    Ok(())
}
