//! The randomness condition: `X rho X` is the same operator `K` for every
//! SLD-unit cotangent `X`.
//!
//! By polarization this is equivalent to
//! `(X_i rho X_j + X_j rho X_i) / 2 = delta_ij K` on one orthonormal basis,
//! which is what [`check_randomness`] tests. When it holds, the random bound
//! is attainable by all locally unbiased measurements and
//! `(a, S) = (2 c^2 W, -c^2 K)` is a closed-form dual certificate.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{HermMat, RMat, RVec, C64};
use crate::model::{fisher, qubit_full, FisherData, QuantumModel};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct RandomnessReport {
    pub is_random: bool,
    /// `X_1 rho X_1` for the first basis direction.
    #[serde(rename = "K", with = "crate::io::herm_serde")]
    pub k: HermMat,
    pub max_residual: f64,
    /// Columns are the `J`-orthonormal tangent directions used.
    #[serde(with = "crate::io::rmat_serde")]
    pub basis_used: RMat,
    /// Residual within a factor 10 above `tol`: a near miss worth a look.
    pub borderline: bool,
}

/// Gram-Schmidt of the columns of `start` under `<x, y> = x^T J y`.
pub fn j_orthonormalize(j: &RMat, start: &RMat) -> Result<RMat> {
    let n = j.nrows();
    if start.nrows() != n || start.ncols() != n {
        return Err(Error::InvalidInput("starting basis must be n x n".into()));
    }
    let mut out = RMat::zeros(n, n);
    for c in 0..n {
        let mut v: RVec = start.column(c).into_owned();
        // Two passes keep the result orthonormal to working precision.
        for _ in 0..2 {
            for p in 0..c {
                let e = out.column(p);
                let proj = (e.transpose() * j * &v)[(0, 0)];
                v -= e * proj;
            }
        }
        let norm2 = (v.transpose() * j * &v)[(0, 0)];
        if !(norm2 > 1e-24) {
            return Err(Error::InvalidInput("starting basis is linearly dependent".into()));
        }
        out.set_column(c, &(v / norm2.sqrt()));
    }
    Ok(out)
}

pub fn check_randomness(model: &QuantumModel, fisher: &FisherData, tol: f64) -> Result<RandomnessReport> {
    let n = fisher.n_params();
    check_randomness_from(model, fisher, &RMat::identity(n, n), tol)
}

/// As [`check_randomness`], orthonormalizing the columns of `start`.
pub fn check_randomness_from(
    model: &QuantumModel,
    fisher: &FisherData,
    start: &RMat,
    tol: f64,
) -> Result<RandomnessReport> {
    if fisher.n_params() != model.n_params() {
        return Err(Error::InvalidInput("Fisher data does not match the model".into()));
    }
    let basis = j_orthonormalize(&fisher.j, start)?;
    let n = basis.ncols();
    let rho = model.rho();
    let xs: Vec<HermMat> = (0..n)
        .map(|i| {
            let e: Vec<f64> = basis.column(i).iter().copied().collect();
            fisher.sld_for(&e)
        })
        .collect();
    let k = xs[0].sandwich(rho);
    let mut max_residual = 0.0_f64;
    for i in 0..n {
        for jx in i..n {
            let sym = HermMat::hermitize(
                (xs[i].mul(rho) * xs[jx].matrix() + xs[jx].mul(rho) * xs[i].matrix()) * C64::new(0.5, 0.0),
            );
            let target = if i == jx { k.clone() } else { HermMat::zeros(model.dim()) };
            max_residual = max_residual.max(sym.sub(&target).frobenius());
        }
    }
    Ok(RandomnessReport {
        is_random: max_residual <= tol,
        k,
        max_residual,
        basis_used: basis,
        borderline: max_residual > tol && max_residual <= 10.0 * tol,
    })
}

/// Largest `||L_e rho L_e - (I - rho)||_F` over `trials` random `J`-unit
/// directions `e` of the full qubit model with Bloch vector `(0, 0, alpha)`.
pub fn qubit_identity_check(alpha: f64, trials: usize, seed: u64) -> Result<f64> {
    let model = qubit_full(alpha)?;
    let f = fisher(&model)?;
    let target = HermMat::identity(2).sub(model.rho());
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        worst = worst.max(identity_residual(&model, &f, &x, &target));
    }
    Ok(worst)
}

/// `||L_e rho L_e - target||_F` for `e` the `J`-normalization of `x`.
pub fn identity_residual(model: &QuantumModel, fisher: &FisherData, x: &[f64], target: &HermMat) -> f64 {
    let v = RVec::from_column_slice(x);
    let norm = (v.transpose() * &fisher.j * &v)[(0, 0)].sqrt();
    let e: Vec<f64> = x.iter().map(|c| c / norm).collect();
    fisher.sld_for(&e).sandwich(model.rho()).sub(target).frobenius()
}
