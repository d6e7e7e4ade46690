//! Exact covariance of the optimal random measurement against a Monte Carlo
//! estimate. Sampling is parallel and reproducible for a fixed seed.

use qcrb::model::{fisher, qubit_full, WeightForm};
use qcrb::randbound::build_plan;
use qcrb::sim::{exact_covariance, exact_expectation, sample, unbiasedness_residual};

fn main() -> qcrb::Result<()> {
    let model = qubit_full(0.5)?;
    let f = fisher(&model)?;
    let g = WeightForm::identity(3);
    let plan = build_plan(&model, &f, &g)?;

    println!("mean at rho {:?}", exact_expectation(&plan, model.rho())?);
    println!("unbiasedness residual {:.2e}", unbiasedness_residual(&plan, &model)?);

    let exact = exact_covariance(&plan)?;
    let stats = sample(&plan, model.rho(), 100_000, 42)?;
    println!("{:>3} {:>3} {:>12} {:>12} {:>10} {:>6}", "i", "j", "exact", "sampled", "stderr", "z");
    for i in 0..3 {
        for j in 0..3 {
            let (e, s, se) = (exact[(i, j)], stats.second_moment[(i, j)], stats.stderr[(i, j)]);
            let z = if se > 0.0 { (s - e) / se } else { 0.0 };
            println!("{i:>3} {j:>3} {e:>12.6} {s:>12.6} {se:>10.2e} {z:>6.2}");
        }
    }
    Ok(())
}
