//! For a commuting (classical) model every SLD is diagonal and the dual
//! value collapses to `tr(J^-1 g)`, strictly below the random bound.
//!
//! `cargo run --release --example classical_baseline`

use qcrb::duallp::{dual_bound, DualOptions};
use qcrb::io::load_model;
use qcrb::model::{fisher, WeightForm};
use qcrb::randbound::random_bound;

fn main() -> qcrb::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/classical_uniform.json");
    let model = load_model(path.as_ref())?;
    let f = fisher(&model)?;
    let g = WeightForm::identity(2);

    let solve = dual_bound(&model, &f, &g, DualOptions::default())?;
    println!("dual          {:.10} ({:?})", solve.certificate.spur, solve.status);
    println!("tr(J^-1)      {:.10}", f.sld_bound(g.matrix()));
    println!("random bound  {:.10}", random_bound(&f.j, g.matrix())?);
    Ok(())
}
