//! Optimum over locally unbiased random measurements.
//!
//! A random measurement picks branch `i` with probability `W_i`, measures the
//! SLD observable `L_{e_i}` along a `J`-unit direction `e_i` and reports
//! `lambda / W_i * e_i`. Its covariance is `sum_i e_i e_i^T / W_i`, which is
//! `W^{-1} J^{-1}` for the `J`-self-adjoint endomorphism
//! `W = sum_i W_i e_i e_i^T J`. Minimizing `tr(g V)` under `tr W = 1` gives
//! `(tr sqrt(J^{-1} g))^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, inverse, sym_apply, sym_eig, sym_inv_sqrt, sym_min_eig, sym_sqrt, symmetrize,
    EigenDecomp, HermMat, RMat,
};
use crate::model::{FisherData, QuantumModel, WeightForm};

/// Weights `W_i` at or below this value make the optimal plan undefined.
pub const DEGENERATE_WEIGHT: f64 = 1e-12;

fn check_pd(j: &RMat, what: &str) -> Result<()> {
    if j.nrows() != j.ncols() || j.nrows() == 0 {
        return Err(Error::InvalidInput(format!("{what} must be a non-empty square matrix")));
    }
    let lmin = sym_min_eig(j);
    if !(lmin > 0.0) {
        return Err(Error::InvalidInput(format!(
            "{what} is not positive definite (min eigenvalue {lmin:.3e})"
        )));
    }
    Ok(())
}

/// `J^{-1/2} g J^{-1/2}`, whose spectrum is that of `J^{-1} g`.
fn whitened_weight(j: &RMat, g: &RMat) -> Result<(RMat, RMat)> {
    check_pd(j, "Fisher matrix")?;
    if g.shape() != j.shape() {
        return Err(Error::InvalidInput(format!(
            "weight is {}x{}, Fisher matrix is {}x{}",
            g.nrows(),
            g.ncols(),
            j.nrows(),
            j.ncols()
        )));
    }
    let jis = sym_inv_sqrt(j)?;
    let gw = symmetrize(&(&jis * g * &jis));
    Ok((gw, jis))
}

/// `(sum_i sqrt(lambda_i))^2` over the eigenvalues of `J^{-1} g`.
pub fn random_bound(j: &RMat, g: &RMat) -> Result<f64> {
    let (gw, _) = whitened_weight(j, g)?;
    let (vals, _) = sym_eig(&gw);
    // Eigenvalues at roundoff level would otherwise enter as their square root.
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let floor = 8.0 * f64::EPSILON * vals.len() as f64 * top;
    let s: f64 = vals.iter().filter(|&&x| x > floor).map(|&x| x.sqrt()).sum();
    Ok(s * s)
}

/// Principal root `sqrt(J^{-1} g)` normalized to unit trace.
pub fn optimal_w(j: &RMat, g: &RMat) -> Result<RMat> {
    let (gw, jis) = whitened_weight(j, g)?;
    let (vals, _) = sym_eig(&gw);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    if vals[0] <= DEGENERATE_WEIGHT * top.max(1.0) {
        return Err(Error::DegenerateWeight(format!(
            "weight is singular relative to the Fisher metric (eigenvalue {:.3e})",
            vals[0]
        )));
    }
    let root = sym_sqrt(&gw);
    let tr = root.trace();
    let js = sym_sqrt(j);
    Ok(jis * root * js / tr)
}

/// One branch of a random measurement.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Probability `W_i` of running this branch.
    pub prob: f64,
    /// `J`-unit tangent direction `e_i`.
    pub direction: Vec<f64>,
    /// `1 / W_i`.
    pub estimator_scale: f64,
    /// The measured observable `L_{e_i} = sum_k (e_i)_k L_k`.
    pub operator: HermMat,
    /// Spectral data of `operator`.
    pub observable: EigenDecomp,
}

impl Branch {
    /// Estimate reported for eigenvalue `lambda`.
    pub fn outcome(&self, lambda: f64) -> Vec<f64> {
        self.direction
            .iter()
            .map(|e| lambda * self.estimator_scale * e)
            .collect()
    }
}

/// The optimal random measurement for a weight `g`.
#[derive(Debug, Clone)]
pub struct RandomMeasurementPlan {
    pub branches: Vec<Branch>,
    pub w: RMat,
    pub j: RMat,
    /// State at which the plan is locally unbiased.
    pub rho: HermMat,
}

impl RandomMeasurementPlan {
    pub fn n_params(&self) -> usize {
        self.j.nrows()
    }
}

pub fn build_plan(
    model: &QuantumModel,
    fisher: &FisherData,
    g: &WeightForm,
) -> Result<RandomMeasurementPlan> {
    let j = &fisher.j;
    let n = j.nrows();
    if model.n_params() != n || g.dim() != n {
        return Err(Error::InvalidInput(format!(
            "model has {} parameters, Fisher matrix {n}, weight {}",
            model.n_params(),
            g.dim()
        )));
    }
    let (gw, jis) = whitened_weight(j, g.matrix())?;
    let root = sym_sqrt(&gw);
    let tr = root.trace();
    if !(tr > 0.0) {
        return Err(Error::DegenerateWeight("weight is zero".into()));
    }
    let (weights, u) = sym_eig(&(root / tr));
    if let Some(&wi) = weights.iter().find(|&&wi| wi <= DEGENERATE_WEIGHT) {
        return Err(Error::DegenerateWeight(format!(
            "branch weight {wi:.3e} is not positive"
        )));
    }
    let total: f64 = weights.iter().sum();
    let mut branches = Vec::with_capacity(n);
    let mut w = RMat::zeros(n, n);
    for (i, &raw) in weights.iter().enumerate() {
        let wi = raw / total;
        let mut e = &jis * u.column(i);
        let norm = (e.transpose() * j * &e)[(0, 0)].sqrt();
        e /= norm;
        w += (&e * e.transpose() * j) * wi;
        let direction: Vec<f64> = e.iter().copied().collect();
        let operator = fisher.sld_for(&direction);
        let observable = eig_hermitian(&operator);
        branches.push(Branch {
            prob: wi,
            direction,
            estimator_scale: 1.0 / wi,
            operator,
            observable,
        });
    }
    Ok(RandomMeasurementPlan {
        branches,
        w,
        j: j.clone(),
        rho: model.rho().clone(),
    })
}

/// Predicted covariance `sum_i e_i e_i^T / W_i`.
pub fn plan_covariance(plan: &RandomMeasurementPlan) -> RMat {
    let n = plan.n_params();
    let mut v = RMat::zeros(n, n);
    for b in &plan.branches {
        let e = nalgebra::DVector::from_column_slice(&b.direction);
        v += (&e * e.transpose()) * b.estimator_scale;
    }
    symmetrize(&v)
}

/// Closed-form random bound with its optimal `W` and covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: f64,
    #[serde(rename = "W", with = "crate::io::rmat_serde")]
    pub w: RMat,
    #[serde(rename = "V", with = "crate::io::rmat_serde")]
    pub v: RMat,
    pub method: String,
}

pub fn random_report(j: &RMat, g: &RMat) -> Result<BoundReport> {
    let bound = random_bound(j, g)?;
    let w = optimal_w(j, g)?;
    let v = symmetrize(&(inverse(&w)? * inverse(j)?));
    Ok(BoundReport {
        bound,
        w,
        v,
        method: "random".into(),
    })
}

/// Outcome of a limit-set membership test; the witness is always filled in.
#[derive(Debug, Clone, Serialize)]
pub struct LimitMembership {
    pub member: bool,
    #[serde(rename = "W", with = "crate::io::rmat_serde")]
    pub witness: RMat,
    pub trace: f64,
    /// `max |(J W - W^T J)_ij|`.
    pub self_adjoint_residual: f64,
    pub min_eigenvalue: f64,
    /// False when the witness is not `J`-self-adjoint, i.e. outside the class
    /// of endomorphisms this test covers.
    pub in_class: bool,
}

/// Is `V` of the form `W^{-1} J^{-1}` with `W` positive, `J`-self-adjoint
/// and of unit trace?
pub fn limit_membership(v: &RMat, j: &RMat, tol: f64) -> Result<LimitMembership> {
    check_pd(j, "Fisher matrix")?;
    if v.shape() != j.shape() {
        return Err(Error::InvalidInput("covariance and Fisher shapes differ".into()));
    }
    let vj = v * j;
    let w = vj
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("covariance matrix is singular".into()))?;
    let jw = j * &w;
    let residual = crate::linalg::asymmetry(&jw);
    let in_class = residual <= tol;
    let jis = sym_inv_sqrt(j)?;
    let similar = symmetrize(&(&jis * symmetrize(&jw) * &jis));
    let min_eigenvalue = sym_min_eig(&similar);
    let trace = w.trace();
    let member = in_class && (trace - 1.0).abs() <= tol && min_eigenvalue > 0.0;
    Ok(LimitMembership {
        member,
        witness: w,
        trace,
        self_adjoint_residual: residual,
        min_eigenvalue,
        in_class,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitMembership2 {
    pub member: bool,
    #[serde(with = "crate::io::rmat_serde")]
    pub witness: RMat,
    pub det: f64,
}

/// Two-parameter form: `X = (V - J^{-1}) J` must have unit determinant.
pub fn limit_membership_2param(v: &RMat, j: &RMat, tol: f64) -> Result<LimitMembership2> {
    if j.nrows() != 2 || v.nrows() != 2 || j.ncols() != 2 || v.ncols() != 2 {
        return Err(Error::InvalidInput("two-parameter test needs 2x2 matrices".into()));
    }
    check_pd(j, "Fisher matrix")?;
    check_pd(&symmetrize(v), "covariance matrix")?;
    let x = (v - inverse(j)?) * j;
    let det = x.determinant();
    Ok(LimitMembership2 {
        member: (det - 1.0).abs() <= tol,
        witness: x,
        det,
    })
}

/// Applies `f` to the `J`-self-adjoint matrix `A` through `J^{1/2} A J^{-1/2}`.
/// Used by tests that sample `J`-self-adjoint endomorphisms.
pub fn j_self_adjoint_from(j: &RMat, sym: &RMat) -> RMat {
    let js = sym_sqrt(j);
    let jis = sym_apply(j, |x| 1.0 / x.sqrt());
    jis * symmetrize(sym) * js
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_frobenius;
    use crate::model::{fisher, qubit_full};

    fn diag(v: &[f64]) -> RMat {
        RMat::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    /// Independent oracle: minimize `tr(g W^{-1} J^{-1})` over `J`-self-adjoint
    /// `W` on a grid of diagonal weights (valid when `J` and `g` are diagonal).
    fn grid_min_diag(jd: &[f64], gd: &[f64]) -> f64 {
        let steps = 400;
        let mut best = f64::INFINITY;
        for a in 1..steps {
            for b in 1..(steps - a) {
                let w = [a as f64 / steps as f64, b as f64 / steps as f64];
                let w3 = 1.0 - w[0] - w[1];
                let ws = [w[0], w[1], w3];
                let val: f64 = (0..3).map(|i| gd[i] / (ws[i] * jd[i])).sum();
                best = best.min(val);
            }
        }
        best
    }

    #[test]
    fn qubit_identity_weight() {
        let f = fisher(&qubit_full(0.5).unwrap()).unwrap();
        let b = random_bound(&f.j, &RMat::identity(3, 3)).unwrap();
        let exact = (2.0 + 0.75f64.sqrt()).powi(2);
        assert!((b - exact).abs() < 1e-12);
        assert!((b - 8.2141016151).abs() < 1e-9);
        let grid = grid_min_diag(&[1.0, 1.0, 4.0 / 3.0], &[1.0, 1.0, 1.0]);
        assert!(grid >= b - 1e-12 && grid - b < 1e-3, "grid {grid} bound {b}");
    }

    #[test]
    fn weight_equal_to_fisher() {
        let j = RMat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let b = random_bound(&j, &j).unwrap();
        assert!((b - 4.0).abs() < 1e-12);
        let w = optimal_w(&j, &j).unwrap();
        assert!(real_frobenius(&(w - RMat::identity(2, 2) * 0.5)) < 1e-12);
    }

    #[test]
    fn scalar_case() {
        let b = random_bound(&diag(&[4.0]), &diag(&[2.0])).unwrap();
        assert!((b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn optimal_w_qubit() {
        let f = fisher(&qubit_full(0.5).unwrap()).unwrap();
        let w = optimal_w(&f.j, &RMat::identity(3, 3)).unwrap();
        let s = 0.75f64.sqrt();
        let expected = diag(&[1.0, 1.0, s]) / (2.0 + s);
        assert!(real_frobenius(&(w - expected)) < 1e-12);
    }

    #[test]
    fn singular_weight() {
        let j = RMat::identity(2, 2);
        let g = diag(&[1.0, 0.0]);
        assert!((random_bound(&j, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(optimal_w(&j, &g), Err(Error::DegenerateWeight(_))));
        assert!(random_bound(&diag(&[1.0, 0.0]), &j).is_err());
    }

    #[test]
    fn plans_for_qubit() {
        let m = qubit_full(0.0).unwrap();
        let f = fisher(&m).unwrap();
        let plan = build_plan(&m, &f, &WeightForm::identity(3)).unwrap();
        assert_eq!(plan.branches.len(), 3);
        for (k, b) in plan.branches.iter().enumerate() {
            assert!((b.prob - 1.0 / 3.0).abs() < 1e-12);
            assert!((b.estimator_scale - 3.0).abs() < 1e-12);
            let sigma = crate::model::pauli(k + 1);
            assert!(b.operator.sub(&sigma).frobenius() < 1e-12);
        }

        let m = qubit_full(0.5).unwrap();
        let f = fisher(&m).unwrap();
        let g = WeightForm::new(f.j.clone()).unwrap();
        let plan = build_plan(&m, &f, &g).unwrap();
        for (k, b) in plan.branches.iter().enumerate() {
            assert!((b.prob - 1.0 / 3.0).abs() < 1e-12);
            // Same projective measurement as L_k: proportional operators.
            let lk = &f.slds[k];
            let ratio = b.operator.hs_inner(lk) / lk.hs_inner(lk);
            assert!(b.operator.sub(&lk.scale(ratio)).frobenius() < 1e-12);
        }
        let v = plan_covariance(&plan);
        assert!(real_frobenius(&(v - f.j_inv() * 3.0)) < 1e-10);
    }

    #[test]
    fn plan_covariance_matches_bound() {
        let m = qubit_full(0.5).unwrap();
        let f = fisher(&m).unwrap();
        let plan = build_plan(&m, &f, &WeightForm::identity(3)).unwrap();
        let v = plan_covariance(&plan);
        let exact = (2.0 + 0.75f64.sqrt()).powi(2);
        assert!((v.trace() - exact).abs() < 1e-9);
        let expected = inverse(&plan.w).unwrap() * f.j_inv();
        assert!(real_frobenius(&(v - expected)) < 1e-10);
    }

    #[test]
    fn scalar_plan() {
        let m = crate::model::classical_model(&[0.7, 0.3], &[vec![1.0, -1.0]]).unwrap();
        let f = fisher(&m).unwrap();
        let plan = build_plan(&m, &f, &WeightForm::identity(1)).unwrap();
        assert_eq!(plan.branches.len(), 1);
        assert!((plan.branches[0].prob - 1.0).abs() < 1e-15);
        let l = f.slds[0].scale(1.0 / f.j[(0, 0)].sqrt());
        assert!(plan.branches[0].operator.sub(&l).frobenius() < 1e-12);
        assert!((plan_covariance(&plan)[(0, 0)] - 1.0 / f.j[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn limit_examples() {
        let j = RMat::from_row_slice(3, 3, &[2.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let jinv = inverse(&j).unwrap();
        let r = limit_membership(&(&jinv * 3.0), &j, 1e-9).unwrap();
        assert!(r.member);
        assert!(real_frobenius(&(r.witness - RMat::identity(3, 3) / 3.0)) < 1e-12);
        let r = limit_membership(&(&jinv * 3.0 + RMat::identity(3, 3) * 0.1), &j, 1e-9).unwrap();
        assert!(!r.member);
        assert!(r.trace < 1.0);
        let r = limit_membership(&jinv, &j, 1e-9).unwrap();
        assert!(!r.member);
        assert!((r.trace - 3.0).abs() < 1e-12);
        assert!(limit_membership(&RMat::zeros(3, 3), &j, 1e-9).is_err());
    }

    #[test]
    fn two_parameter_examples() {
        let j = RMat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let jinv = inverse(&j).unwrap();
        let r = limit_membership_2param(&(&jinv * 2.0), &j, 1e-9).unwrap();
        assert!(r.member);
        assert!(real_frobenius(&(r.witness - RMat::identity(2, 2))) < 1e-12);
        let r = limit_membership_2param(&(&jinv * 3.0), &j, 1e-9).unwrap();
        assert!(!r.member);
        assert!((r.det - 4.0).abs() < 1e-12);
        assert!(limit_membership_2param(&RMat::identity(3, 3), &RMat::identity(3, 3), 1e-9).is_err());
    }
}
