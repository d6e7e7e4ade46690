//! Load a model from JSON and print its SLDs and Fisher matrix.
//!
//! ```text
//! cargo run --example fisher_info [model.json]
//! ```

use std::path::PathBuf;

use qcrb::io::load_model;
use qcrb::model::fisher;

fn main() -> qcrb::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/qubit_alpha05.json")));
    let model = load_model(&path)?;
    let f = fisher(&model)?;

    println!("dimension {}, {} parameters", model.dim(), model.n_params());
    println!("rho spectrum {:?}", model.rho_eigen().eigenvalues);
    for (k, l) in f.slds.iter().enumerate() {
        println!("L_{k} = {}", l.matrix());
    }
    println!("J = {}", f.j);
    println!("J^-1 = {}", f.j_inv());
    println!("SLD bound tr(J^-1) = {:.10}", f.sld_bound(&qcrb::linalg::RMat::identity(model.n_params(), model.n_params())));
    Ok(())
}
