//! Which covariance matrices are reached by random measurements: those with
//! `V = W^{-1} J^{-1}` for some positive, `J`-self-adjoint `W` of unit trace.

use qcrb::linalg::RMat;
use qcrb::model::{fisher, qubit_full, submodel, WeightForm};
use qcrb::randbound::{limit_membership, limit_membership_2param, random_report};

fn main() -> qcrb::Result<()> {
    let model = qubit_full(0.5)?;
    let f = fisher(&model)?;

    let reached = random_report(&f.j, WeightForm::identity(3).matrix())?.v;
    let m = limit_membership(&reached, &f.j, 1e-9)?;
    println!("optimal V: member {} (trace W {:.12})", m.member, m.trace);

    let inflated = &reached * 1.5;
    let m = limit_membership(&inflated, &f.j, 1e-9)?;
    println!("1.5 V: member {} (trace W {:.6})", m.member, m.trace);

    let plane = submodel(&model, &RMat::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]))?;
    let fp = fisher(&plane)?;
    let v = random_report(&fp.j, &RMat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]))?.v;
    let general = limit_membership(&v, &fp.j, 1e-9)?;
    let two = limit_membership_2param(&v, &fp.j, 1e-9)?;
    println!("two parameters: general {}, determinant form {} (det {:.12})", general.member, two.member, two.det);
    Ok(())
}
