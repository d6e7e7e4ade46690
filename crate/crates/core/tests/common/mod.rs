//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qcrb::linalg::{HermMat, RMat, C64};
use qcrb::model::{build_model, fisher, QuantumModel};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TestRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> TestRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn normal(rng: &mut TestRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_hermitian(rng: &mut TestRng, d: usize) -> HermMat {
    let m = DMatrix::from_fn(d, d, |_, _| C64::new(normal(rng), normal(rng)));
    HermMat::hermitize(&m + m.adjoint())
}

/// Full-rank density matrix with smallest eigenvalue at least `floor / d`.
pub fn random_state(rng: &mut TestRng, d: usize, floor: f64) -> HermMat {
    let a = DMatrix::from_fn(d, d, |_, _| C64::new(normal(rng), normal(rng)));
    let w = HermMat::hermitize(&a * a.adjoint());
    let w = w.scale(1.0 / w.trace());
    w.scale(1.0 - floor).axpy(floor / d as f64, &HermMat::identity(d))
}

/// Random model with traceless derivatives and a reasonably conditioned
/// Fisher matrix. Requires `n <= d^2 - 1`.
pub fn random_model(rng: &mut TestRng, d: usize, n: usize) -> QuantumModel {
    loop {
        let rho = random_state(rng, d, 0.2);
        let derivs: Vec<HermMat> = (0..n)
            .map(|_| {
                let h = random_hermitian(rng, d);
                let shift = h.trace() / d as f64;
                h.axpy(-shift, &HermMat::identity(d)).scale(0.3)
            })
            .collect();
        let Ok(m) = build_model(rho, derivs) else { continue };
        let Ok(f) = fisher(&m) else { continue };
        let (vals, _) = qcrb::linalg::sym_eig(&f.j);
        if vals[0] > 1e-2 * vals[n - 1] {
            return m;
        }
    }
}

/// Symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut TestRng, n: usize, lo: f64, hi: f64) -> RMat {
    let a = RMat::from_fn(n, n, |_, _| normal(rng));
    let q = a.qr().q();
    let d = RMat::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(lo..hi)));
    qcrb::linalg::symmetrize(&(&q * d * q.transpose()))
}

/// Positive `J`-self-adjoint `W` with unit trace and spectrum spread at most
/// a factor five.
pub fn random_w(rng: &mut TestRng, j: &RMat) -> RMat {
    let n = j.nrows();
    let p = random_spd(rng, n, 0.2, 1.0);
    let w = qcrb::randbound::j_self_adjoint_from(j, &p);
    let t = w.trace();
    w / t
}

/// `W^T J W`, the weight for which `W` is optimal with value one.
pub fn normalized_weight(j: &RMat, w: &RMat) -> RMat {
    qcrb::linalg::symmetrize(&(w.transpose() * j * w))
}

/// Minimizes `tr(g W^{-1} J^{-1})` over positive `J`-self-adjoint `W` with
/// `tr W = 1` by projected gradient descent with backtracking.
///
/// With `W = J^{-1/2} P J^{1/2}` the problem is `min tr(G P^{-1})` over
/// symmetric positive `P` with unit trace, `G = J^{-1/2} g J^{-1/2}`.
pub fn projected_gradient_bound(j: &RMat, g: &RMat, iters: usize) -> f64 {
    let n = j.nrows();
    let jis = qcrb::linalg::sym_inv_sqrt(j).unwrap();
    let gw = qcrb::linalg::symmetrize(&(&jis * g * &jis));
    let eye = RMat::identity(n, n);
    let value = |p: &RMat| -> Option<f64> {
        let chol = p.clone().cholesky()?;
        Some((&gw * chol.inverse()).trace())
    };
    let mut p = &eye / n as f64;
    let mut f = value(&p).unwrap();
    let mut step = 1e-2;
    for _ in 0..iters {
        let pinv = p.clone().cholesky().unwrap().inverse();
        let grad = -(&pinv * &gw * &pinv);
        let grad = qcrb::linalg::symmetrize(&grad);
        let proj = &grad - &eye * (grad.trace() / n as f64);
        let gnorm2 = proj.norm_squared();
        if gnorm2 < 1e-30 {
            break;
        }
        step *= 2.0;
        loop {
            let cand = &p - &proj * step;
            match value(&cand) {
                Some(fc) if fc <= f - 0.25 * step * gnorm2 => {
                    p = cand;
                    f = fc;
                    break;
                }
                _ => {
                    step *= 0.5;
                    if step < 1e-300 {
                        return f;
                    }
                }
            }
        }
    }
    f
}

/// Exhaustive search over the vertices of `{A x <= b, l <= x <= u}` for the
/// maximum of `c^T x`; every bound must be finite.
pub fn vertex_enumeration(c: &[f64], rows: &[Vec<f64>], rhs: &[f64], lower: &[f64], upper: &[f64]) -> Option<f64> {
    vertex_enumeration_tol(c, rows, rhs, lower, upper, 1e-9)
}

/// [`vertex_enumeration`] with relative feasibility tolerance `feas`.
pub fn vertex_enumeration_tol(
    c: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
    lower: &[f64],
    upper: &[f64],
    feas: f64,
) -> Option<f64> {
    let n = c.len();
    let mut normals: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, &b) in rows.iter().zip(rhs) {
        normals.push((r.clone(), b));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        normals.push((e.clone(), upper[j]));
        e[j] = -1.0;
        normals.push((e, -lower[j]));
    }
    let m = normals.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = RMat::from_fn(n, n, |i, k| normals[idx[i]].0[k]);
        let b = nalgebra::DVector::from_fn(n, |i, _| normals[idx[i]].1);
        let lu = a.lu();
        let solved = if lu.determinant().abs() > 1e-10 { lu.solve(&b) } else { None };
        if let Some(x) = solved {
            let feasible = normals.iter().all(|(r, rb)| {
                let lhs: f64 = r.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                lhs <= rb + feas * (1.0 + rb.abs())
            });
            if feasible && x.iter().all(|v| v.is_finite()) {
                let obj: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(obj, |b: f64| b.max(obj)));
            }
        }
        // next n-subset of 0..m
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for k in i + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}
