//! JSON file formats.
//!
//! Model file:
//! `{ "dim": d, "rho": [[[re, im], ...], ...], "derivatives": [matrix, ...], "names": [...] }`
//! with row-major complex matrices. Weight file: `{ "g": [[...]] }`.
//! Covariance file: `{ "V": [[...]] }`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HermMat, RMat, C64};
use crate::model::{build_model, QuantumModel, WeightForm};

/// Complex matrix as nested `[re, im]` pairs.
pub type ComplexRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub dim: usize,
    pub rho: ComplexRows,
    pub derivatives: Vec<ComplexRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightFile {
    pub g: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceFile {
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
}

pub fn herm_to_rows(m: &HermMat) -> ComplexRows {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn herm_from_rows(rows: &ComplexRows, dim: usize, what: &str) -> Result<HermMat> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidInput(format!("{what} must be {dim}x{dim}")));
    }
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|[re, im]| C64::new(*re, *im)).collect())
        .collect();
    HermMat::from_rows(&rows)
}

pub fn rmat_to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rmat_from_rows(rows: &[Vec<f64>]) -> Result<RMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput("matrix rows are empty or ragged".into()));
    }
    Ok(RMat::from_fn(r, c, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_model(model: &QuantumModel) -> Self {
        ModelFile {
            dim: model.dim(),
            rho: herm_to_rows(model.rho()),
            derivatives: model.derivs().iter().map(herm_to_rows).collect(),
            names: model.names().map(<[String]>::to_vec),
        }
    }

    pub fn into_model(self) -> Result<QuantumModel> {
        let rho = herm_from_rows(&self.rho, self.dim, "rho")?;
        let derivs = self
            .derivatives
            .iter()
            .enumerate()
            .map(|(i, m)| herm_from_rows(m, self.dim, &format!("derivative {i}")))
            .collect::<Result<Vec<_>>>()?;
        let model = build_model(rho, derivs)?;
        match self.names {
            Some(names) => model.with_names(names),
            None => Ok(model),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("cannot parse {}: {e}", path.display())))
}

pub fn parse_model(text: &str) -> Result<QuantumModel> {
    let file: ModelFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("cannot parse model: {e}")))?;
    file.into_model()
}

pub fn load_model(path: &Path) -> Result<QuantumModel> {
    read_json::<ModelFile>(path)?.into_model()
}

pub fn load_weight(path: &Path) -> Result<WeightForm> {
    let file: WeightFile = read_json(path)?;
    WeightForm::new(rmat_from_rows(&file.g)?)
}

pub fn load_covariance(path: &Path) -> Result<RMat> {
    let file: CovarianceFile = read_json(path)?;
    rmat_from_rows(&file.v)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// Serde adapter writing a real matrix as row-major nested arrays.
pub mod rmat_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &RMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        rmat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<RMat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        rmat_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing a Hermitian matrix as nested `[re, im]` pairs.
pub mod herm_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &HermMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        herm_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<HermMat, D::Error> {
        let rows = ComplexRows::deserialize(d)?;
        let dim = rows.len();
        herm_from_rows(&rows, dim, "matrix").map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::qubit_full;

    #[test]
    fn model_file_round_trip() {
        let m = qubit_full(0.5).unwrap();
        let text = to_json(&ModelFile::from_model(&m));
        let back = parse_model(&text).unwrap();
        assert_eq!(back.rho(), m.rho());
        assert_eq!(back.derivs(), m.derivs());
        assert_eq!(back.names(), m.names());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_model("{"), Err(Error::InvalidInput(_))));
        let bad_shape = r#"{"dim": 2, "rho": [[[1,0]]], "derivatives": []}"#;
        assert!(matches!(parse_model(bad_shape), Err(Error::InvalidInput(_))));
        let neg = r#"{"dim": 2, "rho": [[[1.001,0],[0,0]],[[0,0],[-0.001,0]]],
                      "derivatives": [[[[0,0],[1,0]],[[1,0],[0,0]]]]}"#;
        assert_eq!(parse_model(neg).unwrap_err().exit_code(), 3);
    }
}
