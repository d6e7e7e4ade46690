//! Dense Hermitian linear algebra.
//!
//! Everything in the crate that needs a spectrum goes through [`eig_hermitian`],
//! a cyclic complex Jacobi solver. Real symmetric problems are routed through the
//! same solver: a complex Jacobi rotation applied to a real symmetric matrix has
//! a phase of `±1`, so the iteration never leaves the reals.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Absolute tolerance on `|H_jk - conj(H_kj)|` accepted by [`HermMat::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default relative eigenvalue cutoff used to decide the support of a PSD matrix.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_OFF_TOL: f64 = 1e-14;

/// Complex Hermitian `d x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMat(CMat);

impl HermMat {
    /// Validates hermiticity within [`HERMITIAN_TOL`] and stores the exact
    /// Hermitian part.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = hermitian_deviation(&m);
        if !(dev <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::hermitize(m))
    }

    /// Takes the Hermitian part `(M + M*)/2` without checking.
    pub fn hermitize(m: CMat) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        HermMat(h)
    }

    pub fn from_real(m: &RMat) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    /// Row-major constructor.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("matrix rows must form a square".into()));
        }
        Self::new(CMat::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        HermMat(CMat::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        HermMat(CMat::zeros(d, d))
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        HermMat(CMat::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        HermMat(&self.0 * C64::new(s, 0.0))
    }

    pub fn add(&self, other: &HermMat) -> Self {
        HermMat(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermMat) -> Self {
        HermMat(&self.0 - &other.0)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &HermMat) -> Self {
        HermMat(&self.0 + &other.0 * C64::new(s, 0.0))
    }

    /// Plain matrix product (not Hermitian in general).
    pub fn mul(&self, other: &HermMat) -> CMat {
        &self.0 * &other.0
    }

    /// `X rho X` for Hermitian `X = self`.
    pub fn sandwich(&self, middle: &HermMat) -> HermMat {
        HermMat::hermitize(&self.0 * &middle.0 * &self.0)
    }

    /// Jordan product `(A B + B A)/2`.
    pub fn jordan(&self, other: &HermMat) -> HermMat {
        let ab = &self.0 * &other.0;
        let ba = &other.0 * &self.0;
        HermMat::hermitize((ab + ba) * C64::new(0.5, 0.0))
    }

    /// Real linear combination `sum_k coeffs[k] * mats[k]`.
    pub fn combination(coeffs: &[f64], mats: &[HermMat]) -> HermMat {
        assert_eq!(coeffs.len(), mats.len());
        assert!(!mats.is_empty());
        let d = mats[0].dim();
        let mut acc = CMat::zeros(d, d);
        for (c, m) in coeffs.iter().zip(mats) {
            if *c != 0.0 {
                acc += &m.0 * C64::new(*c, 0.0);
            }
        }
        HermMat(acc)
    }

    /// `<psi| self |psi>` (real for Hermitian matrices).
    pub fn expectation(&self, psi: &DVector<C64>) -> f64 {
        let hp = &self.0 * psi;
        psi.dotc(&hp).re
    }

    /// `Re tr(self * other)`, the Hilbert-Schmidt inner product.
    pub fn hs_inner(&self, other: &HermMat) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.0[(i, j)] * other.0[(j, i)]).re;
            }
        }
        acc
    }

    /// Row-major nested vectors.
    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }
}

/// Spectral decomposition `H = U diag(eigenvalues) U*`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` is the eigenvector of `eigenvalues[k]`.
    pub vectors: CMat,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    pub fn reconstruct(&self) -> HermMat {
        self.apply(|x| x)
    }

    /// Functional calculus: `U diag(f(lambda)) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermMat {
        let d = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let s = C64::new(f(self.eigenvalues[k]), 0.0);
            for i in 0..d {
                scaled[(i, k)] *= s;
            }
        }
        HermMat::hermitize(scaled * self.vectors.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// Groups eigenvalue indices whose values agree within `tol`
    /// (consecutive, since the spectrum is sorted).
    pub fn eigenspaces(&self, tol: f64) -> Vec<(f64, Vec<usize>)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (k, &v) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some((rep, idx)) if (v - *rep).abs() <= tol => idx.push(k),
                _ => groups.push((v, vec![k])),
            }
        }
        for (rep, idx) in groups.iter_mut() {
            *rep = idx.iter().map(|&k| self.eigenvalues[k]).sum::<f64>() / idx.len() as f64;
        }
        groups
    }
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_deviation(m: &CMat) -> f64 {
    let d = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let e = (m[(i, j)] - m[(j, i)].conj()).norm();
            if e.is_nan() {
                return f64::NAN;
            }
            dev = dev.max(e);
        }
    }
    dev
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Output is canonical: ascending eigenvalues (ties keep Jacobi column
/// order), and every eigenvector is rotated so that its first
/// largest-modulus component is real and nonnegative.
pub fn eig_hermitian(h: &HermMat) -> EigenDecomp {
    let d = h.dim();
    let mut a = h.matrix().clone();
    let mut v = CMat::identity(d, d);
    let scale = frobenius(&a);
    if scale > 0.0 {
        jacobi_sweeps(&mut a, &mut v, scale);
    }
    let mut order: Vec<usize> = (0..d).collect();
    let raw: Vec<f64> = (0..d).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let mut vectors = CMat::zeros(d, d);
    for (new, &old) in order.iter().enumerate() {
        let col = canonical_phase(v.column(old).into_owned());
        vectors.set_column(new, &col);
    }
    EigenDecomp {
        eigenvalues,
        vectors,
    }
}

/// Validating front door for raw complex matrices.
pub fn eig_hermitian_checked(m: &CMat) -> Result<EigenDecomp> {
    Ok(eig_hermitian(&HermMat::new(m.clone())?))
}

fn off_diagonal_norm(a: &CMat) -> f64 {
    let d = a.nrows();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi_sweeps(a: &mut CMat, v: &mut CMat, scale: f64) {
    let d = a.nrows();
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(a) <= JACOBI_OFF_TOL * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                let phase = apq / mag;
                let sp = phase * s;
                let spc = phase.conj() * s;
                // A <- A U with U = [[c, s e^{i phi}], [-s e^{-i phi}, c]] on (p, q).
                for k in 0..d {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - spc * akq;
                    a[(k, q)] = sp * akp + akq * c;
                }
                // A <- U* A
                for k in 0..d {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - sp * aqk;
                    a[(q, k)] = spc * apk + aqk * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - spc * vkq;
                    v[(k, q)] = sp * vkp + vkq * c;
                }
            }
        }
    }
}

fn canonical_phase(mut col: DVector<C64>) -> DVector<C64> {
    let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return col;
    }
    let pivot = col
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .expect("max is attained");
    let z = col[pivot];
    let rot = z.conj() / z.norm();
    for x in col.iter_mut() {
        *x *= rot;
    }
    col[pivot] = C64::new(col[pivot].norm(), 0.0);
    col
}

/// Principal square root of a PSD matrix. Eigenvalues in
/// `[-1e-10 ||H||, 0)` are clamped to zero.
pub fn sqrt_psd(h: &HermMat) -> Result<HermMat> {
    let e = eig_hermitian(h);
    let norm = e.spectral_norm();
    if e.min() < -1e-10 * norm {
        return Err(Error::NotPsd(e.min()));
    }
    Ok(e.apply(|x| x.max(0.0).sqrt()))
}

/// Moore-Penrose pseudo-inverse of a PSD matrix with eigenvalue cutoff
/// `rank_tol * lambda_max`.
pub fn pinv_psd(h: &HermMat, rank_tol: f64) -> HermMat {
    let e = eig_hermitian(h);
    let cut = rank_tol * e.max().max(0.0);
    e.apply(|x| if x > cut && x > 0.0 { 1.0 / x } else { 0.0 })
}

/// Symmetric logarithmic derivative: the `L` supported on `supp(rho)` with
/// `(rho L + L rho)/2 = D`.
///
/// In the eigenbasis of `rho`, `L_jk = 2 D_jk / (s_j + s_k)` whenever at least
/// one of `j, k` lies in the support. The kernel-kernel block of `D` must
/// vanish (within `1e-9`), otherwise the derivative leaves the support and
/// [`Error::OffSupport`] is returned.
pub fn solve_sld(rho: &HermMat, deriv: &HermMat, rank_tol: f64) -> Result<HermMat> {
    let e = eig_hermitian(rho);
    solve_sld_with(&e, deriv, rank_tol)
}

/// [`solve_sld`] with a precomputed spectral decomposition of `rho`.
pub fn solve_sld_with(rho_eig: &EigenDecomp, deriv: &HermMat, rank_tol: f64) -> Result<HermMat> {
    let d = rho_eig.dim();
    if deriv.dim() != d {
        return Err(Error::InvalidInput(format!(
            "derivative is {}x{}, state is {d}x{d}",
            deriv.dim(),
            deriv.dim()
        )));
    }
    let u = &rho_eig.vectors;
    let cut = rank_tol * rho_eig.max();
    let s: Vec<f64> = rho_eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    let in_supp: Vec<bool> = rho_eig.eigenvalues.iter().map(|&x| x > cut).collect();
    let dt = u.adjoint() * deriv.matrix() * u;
    let mut lt = CMat::zeros(d, d);
    let mut kernel_weight: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            if in_supp[j] || in_supp[k] {
                lt[(j, k)] = dt[(j, k)] * (2.0 / (s[j] + s[k]));
            } else {
                kernel_weight = kernel_weight.max(dt[(j, k)].norm());
            }
        }
    }
    if kernel_weight > 1e-9 {
        return Err(Error::OffSupport(kernel_weight));
    }
    Ok(HermMat::hermitize(u * lt * u.adjoint()))
}

/// SLD inner product `<X|Y>_rho = Re tr(rho X Y)`.
pub fn sld_inner(rho: &HermMat, x: &HermMat, y: &HermMat) -> f64 {
    let prod = rho.matrix() * x.matrix() * y.matrix();
    prod.trace().re
}

// Real symmetric helpers. All of them go through the Hermitian Jacobi solver.

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Ascending eigenvalues and orthonormal eigenvectors of a real symmetric matrix.
pub fn sym_eig(m: &RMat) -> (Vec<f64>, RMat) {
    let h = HermMat::hermitize(m.map(|x| C64::new(x, 0.0)));
    let e = eig_hermitian(&h);
    let vecs = e.vectors.map(|z| z.re);
    (e.eigenvalues, vecs)
}

/// `V diag(f(lambda)) V^T` for a real symmetric matrix.
pub fn sym_apply(m: &RMat, f: impl Fn(f64) -> f64) -> RMat {
    let (vals, vecs) = sym_eig(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..n {
        let s = f(vals[k]);
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    symmetrize(&(scaled * vecs.transpose()))
}

pub fn sym_min_eig(m: &RMat) -> f64 {
    sym_eig(m).0[0]
}

/// PSD square root with clamping of tiny negative eigenvalues.
pub fn sym_sqrt(m: &RMat) -> RMat {
    sym_apply(m, |x| x.max(0.0).sqrt())
}

pub fn sym_inv_sqrt(m: &RMat) -> Result<RMat> {
    let (vals, _) = sym_eig(m);
    if vals[0] <= 0.0 {
        return Err(Error::NotPsd(vals[0]));
    }
    Ok(sym_apply(m, |x| 1.0 / x.sqrt()))
}

pub fn inverse(m: &RMat) -> Result<RMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))
}

pub fn real_frobenius(m: &RMat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `max |A_ij - A_ji|`.
pub fn asymmetry(m: &RMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}
