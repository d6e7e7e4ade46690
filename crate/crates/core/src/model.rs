//! Statistical model at a point: a state, its tangent derivatives, and the
//! SLD Fisher information derived from them.
//!
//! Coordinates: a tangent vector `x` is expanded in the user's derivative list
//! `D_1..D_n`, a cotangent vector `xi` in the SLDs `L_1..L_n`. Norms are
//! `x^T J x` and `xi^T J xi`. The identification of tangent and cotangent
//! spaces is the coordinate identity, so the abstract operator that maps
//! covariances to tangent-space matrices is the inverse Fisher matrix `J^{-1}`
//! in every formula of this crate.

use crate::error::{Error, ModelDefect, Result};
use crate::linalg::{
    eig_hermitian, solve_sld_with, sym_eig, sym_min_eig, EigenDecomp, HermMat, RMat, C64,
    DEFAULT_RANK_TOL,
};

const TRACE_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-9;
const GRAM_TOL: f64 = 1e-10;
const FISHER_TOL: f64 = 1e-10;

/// Density matrix plus `n` tangent derivatives.
#[derive(Debug, Clone)]
pub struct QuantumModel {
    rho: HermMat,
    derivs: Vec<HermMat>,
    names: Option<Vec<String>>,
    rho_eig: EigenDecomp,
}

impl QuantumModel {
    pub fn rho(&self) -> &HermMat {
        &self.rho
    }

    pub fn derivs(&self) -> &[HermMat] {
        &self.derivs
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn rho_eigen(&self) -> &EigenDecomp {
        &self.rho_eig
    }

    /// Hilbert space dimension `d`.
    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// Number of parameters `n`.
    pub fn n_params(&self) -> usize {
        self.derivs.len()
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.derivs.len() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} parameters",
                names.len(),
                self.derivs.len()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Tangent operator `sum_k x_k D_k`.
    pub fn tangent(&self, x: &[f64]) -> HermMat {
        HermMat::combination(x, &self.derivs)
    }
}

/// Validates a state and its derivatives. Never repairs its input.
pub fn build_model(rho: HermMat, derivs: Vec<HermMat>) -> Result<QuantumModel> {
    let d = rho.dim();
    if derivs.is_empty() {
        return Err(Error::InvalidModel(ModelDefect::Shape(
            "at least one derivative is required".into(),
        )));
    }
    if let Some(bad) = derivs.iter().position(|m| m.dim() != d) {
        return Err(Error::InvalidModel(ModelDefect::Shape(format!(
            "derivative {bad} is {0}x{0}, state is {d}x{d}",
            derivs[bad].dim()
        ))));
    }
    let tr = rho.trace();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidModel(ModelDefect::Trace(tr)));
    }
    let rho_eig = eig_hermitian(&rho);
    if rho_eig.min() < -DEFAULT_RANK_TOL * rho_eig.max() {
        return Err(Error::InvalidModel(ModelDefect::NotPsd(rho_eig.min())));
    }
    for (index, dm) in derivs.iter().enumerate() {
        let trace = dm.trace();
        if trace.abs() > TRACE_TOL {
            return Err(Error::InvalidModel(ModelDefect::NotTraceless { index, trace }));
        }
        let weight = kernel_weight(&rho_eig, dm);
        if weight > SUPPORT_TOL {
            return Err(Error::InvalidModel(ModelDefect::OffSupport { index, weight }));
        }
    }
    let n = derivs.len();
    let gram = RMat::from_fn(n, n, |i, j| derivs[i].hs_inner(&derivs[j]));
    let lmin = sym_min_eig(&gram);
    if lmin <= GRAM_TOL {
        return Err(Error::InvalidModel(ModelDefect::Dependent(lmin)));
    }
    Ok(QuantumModel {
        rho,
        derivs,
        names: None,
        rho_eig,
    })
}

/// Largest entry of `D` on the kernel-kernel block of `rho`.
fn kernel_weight(rho_eig: &EigenDecomp, dm: &HermMat) -> f64 {
    let cut = DEFAULT_RANK_TOL * rho_eig.max();
    let kernel: Vec<usize> = (0..rho_eig.dim())
        .filter(|&k| rho_eig.eigenvalues[k] <= cut)
        .collect();
    if kernel.is_empty() {
        return 0.0;
    }
    let u = &rho_eig.vectors;
    let dt = u.adjoint() * dm.matrix() * u;
    let mut w: f64 = 0.0;
    for &j in &kernel {
        for &k in &kernel {
            w = w.max(dt[(j, k)].norm());
        }
    }
    w
}

/// SLDs and the Fisher matrix `J_ij = tr(D_i L_j)`.
#[derive(Debug, Clone)]
pub struct FisherData {
    pub slds: Vec<HermMat>,
    pub j: RMat,
}

impl FisherData {
    pub fn n_params(&self) -> usize {
        self.slds.len()
    }

    pub fn j_inv(&self) -> RMat {
        crate::linalg::inverse(&self.j).expect("Fisher matrix is positive definite")
    }

    /// Cotangent operator `L_xi = sum_k xi_k L_k`.
    pub fn sld_for(&self, xi: &[f64]) -> HermMat {
        HermMat::combination(xi, &self.slds)
    }

    /// SLD Cramér-Rao value `tr(J^{-1} g)`.
    pub fn sld_bound(&self, g: &RMat) -> f64 {
        (self.j_inv() * g).trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_min_eig(&self.j)
    }
}

pub fn fisher(model: &QuantumModel) -> Result<FisherData> {
    let slds = model
        .derivs
        .iter()
        .map(|dm| solve_sld_with(&model.rho_eig, dm, DEFAULT_RANK_TOL))
        .collect::<Result<Vec<_>>>()?;
    let n = slds.len();
    let raw = RMat::from_fn(n, n, |i, j| model.derivs[i].hs_inner(&slds[j]));
    let j = crate::linalg::symmetrize(&raw);
    let lmin = sym_min_eig(&j);
    if lmin <= FISHER_TOL {
        return Err(Error::InvalidModel(ModelDefect::SingularFisher(lmin)));
    }
    Ok(FisherData { slds, j })
}

/// Nonnegative quadratic weight `g` on tangent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightForm {
    g: RMat,
}

impl WeightForm {
    pub fn new(g: RMat) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() == 0 {
            return Err(Error::InvalidInput("weight must be a non-empty square matrix".into()));
        }
        let scale = g.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if crate::linalg::asymmetry(&g) > 1e-12 * scale {
            return Err(Error::InvalidInput("weight matrix is not symmetric".into()));
        }
        let g = crate::linalg::symmetrize(&g);
        let lmin = sym_min_eig(&g);
        if lmin < -1e-12 * scale {
            return Err(Error::NotPsd(lmin));
        }
        Ok(WeightForm { g })
    }

    pub fn identity(n: usize) -> Self {
        WeightForm {
            g: RMat::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &RMat {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_min_eig(&self.g)
    }

    /// `g(x, x)`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.g[(i, j)] * x[j];
            }
        }
        acc
    }
}

/// Pauli matrix `sigma_k`, `k` in `1..=3`.
pub fn pauli(k: usize) -> HermMat {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let rows = match k {
        1 => vec![vec![z, one], vec![one, z]],
        2 => vec![vec![z, -i], vec![i, z]],
        3 => vec![vec![one, z], vec![z, -one]],
        _ => panic!("Pauli index must be 1, 2 or 3"),
    };
    HermMat::from_rows(&rows).expect("Pauli matrices are Hermitian")
}

/// Full three-parameter qubit model at `rho = (I + alpha sigma_3)/2` with
/// derivatives `sigma_k / 2`.
pub fn qubit_full(alpha: f64) -> Result<QuantumModel> {
    if !(alpha.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("|alpha| must be < 1, got {alpha}")));
    }
    let rho = HermMat::identity(2).axpy(alpha, &pauli(3)).scale(0.5);
    let derivs = (1..=3).map(|k| pauli(k).scale(0.5)).collect();
    build_model(rho, derivs)?.with_names(vec!["x".into(), "y".into(), "z".into()])
}

/// The orthonormal frame `f_1 = sigma_1/2`, `f_2 = sigma_2/2`,
/// `f_3 = sqrt(1 - alpha^2) sigma_3 / 2` as operators, together with its
/// coordinates in the `sigma_k/2` basis (columns).
pub fn qubit_frame(alpha: f64) -> (Vec<HermMat>, RMat) {
    let s = (1.0 - alpha * alpha).sqrt();
    let ops = vec![
        pauli(1).scale(0.5),
        pauli(2).scale(0.5),
        pauli(3).scale(0.5 * s),
    ];
    let coords = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, s]));
    (ops, coords)
}

/// Commuting (classical) model: diagonal state `p` and diagonal derivatives.
pub fn classical_model(p: &[f64], derivs: &[Vec<f64>]) -> Result<QuantumModel> {
    if p.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput(
            "classical probabilities must be strictly positive".into(),
        ));
    }
    if let Some(bad) = derivs.iter().position(|dv| dv.len() != p.len()) {
        return Err(Error::InvalidInput(format!(
            "derivative {bad} has length {}, expected {}",
            derivs[bad].len(),
            p.len()
        )));
    }
    let rho = HermMat::diag(p);
    let derivs = derivs.iter().map(|dv| HermMat::diag(dv)).collect();
    build_model(rho, derivs)
}

/// Restriction to the span of the columns of `directions` (`n x m`):
/// `D'_j = sum_i directions[i][j] D_i`.
pub fn submodel(model: &QuantumModel, directions: &RMat) -> Result<QuantumModel> {
    let n = model.n_params();
    if directions.nrows() != n || directions.ncols() == 0 || directions.ncols() > n {
        return Err(Error::InvalidInput(format!(
            "directions must be {n} x m with 1 <= m <= {n}, got {}x{}",
            directions.nrows(),
            directions.ncols()
        )));
    }
    let gram = directions.transpose() * directions;
    let (vals, _) = sym_eig(&gram);
    if vals[0] <= 1e-12 * vals.last().copied().unwrap_or(1.0).max(1.0) {
        return Err(Error::InvalidInput("directions are not full column rank".into()));
    }
    let derivs = (0..directions.ncols())
        .map(|j| {
            let col: Vec<f64> = directions.column(j).iter().copied().collect();
            model.tangent(&col)
        })
        .collect();
    build_model(model.rho.clone(), derivs)
}
