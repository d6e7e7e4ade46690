//! The dense LP solver used by the master problem, on its own.
//!
//! maximize `c^T x` subject to `A x <= b`, `l <= x <= u`.

use qcrb::duallp::{lp_solve, lp_solve_with, LpOptions, LpProblem, PivotRule};

fn main() -> qcrb::Result<()> {
    // max 3x + 2y  s.t.  x + y <= 4,  x + 3y <= 6,  0 <= x <= 3,  y >= 0
    let mut p = LpProblem::new(vec![3.0, 2.0], vec![0.0, 0.0], vec![3.0, f64::INFINITY]);
    p.add_row(vec![1.0, 1.0], 4.0);
    p.add_row(vec![1.0, 3.0], 6.0);
    let s = lp_solve(&p)?;
    println!("{:?}: x = {:?}, objective {}, row duals {:?}", s.status, s.x, s.objective, s.duals);

    let dantzig = lp_solve_with(&p, LpOptions { rule: PivotRule::Dantzig, ..LpOptions::default() })?;
    println!("Dantzig: {:?} in {} iterations", dantzig.status, dantzig.iterations);
    Ok(())
}
