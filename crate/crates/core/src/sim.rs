//! Exact and Monte Carlo evaluation of measurements with finitely many
//! outcomes.
//!
//! A measurement is reduced to an [`OutcomeLaw`]: a list of atoms, each an
//! estimate vector with its positive effect operator. Random measurement
//! plans contribute one atom per branch and eigenspace of the measured
//! observable; LP recoveries contribute one atom per rank-one element.
//!
//! Sampling uses xoshiro256++, a 64-bit xor/shift-register generator. The
//! sample is cut into fixed-size chunks; chunk `c` draws from the base stream
//! advanced by `c` jumps of `2^128` steps, so streams never overlap and the
//! result does not depend on how chunks are spread over threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::duallp::Recovery;
use crate::error::{Error, Result};
use crate::linalg::{HermMat, RMat, C64};
use crate::model::{QuantumModel, WeightForm};
use crate::randbound::RandomMeasurementPlan;

/// Probabilities below `-PROB_TOL` or above `1 + PROB_TOL` are errors;
/// smaller excursions are rounding and get clamped.
pub const PROB_TOL: f64 = 1e-12;
/// Eigenvalues closer than this (relative to the spectral norm) share an
/// eigenspace.
pub const EIGENSPACE_TOL: f64 = 1e-10;
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct Atom {
    pub outcome: Vec<f64>,
    pub effect: HermMat,
}

#[derive(Debug, Clone)]
pub struct OutcomeLaw {
    pub n_params: usize,
    pub atoms: Vec<Atom>,
}

pub trait Measurement {
    fn law(&self) -> Result<OutcomeLaw>;
}

fn check_prob(p: f64, what: &str) -> Result<f64> {
    if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
        return Err(Error::Numerical(format!("{what} {p:.3e} is not a probability")));
    }
    Ok(p.clamp(0.0, 1.0))
}

impl Measurement for RandomMeasurementPlan {
    fn law(&self) -> Result<OutcomeLaw> {
        let d = self.rho.dim();
        let mut atoms = Vec::new();
        for b in &self.branches {
            let prob = check_prob(b.prob, "branch weight")?;
            let obs = &b.observable;
            let tol = EIGENSPACE_TOL * obs.spectral_norm().max(1.0);
            for (lambda, idx) in obs.eigenspaces(tol) {
                let mut proj = nalgebra::DMatrix::<C64>::zeros(d, d);
                for &k in &idx {
                    let v = obs.vector(k);
                    proj += &v * v.adjoint();
                }
                atoms.push(Atom {
                    outcome: b.outcome(lambda),
                    effect: HermMat::hermitize(proj * C64::new(prob, 0.0)),
                });
            }
        }
        Ok(OutcomeLaw {
            n_params: self.n_params(),
            atoms,
        })
    }
}

impl Measurement for Recovery {
    fn law(&self) -> Result<OutcomeLaw> {
        let n_params = self.elements.first().map_or(0, |e| e.x.len());
        let atoms = self
            .elements
            .iter()
            .map(|e| Atom {
                outcome: e.x.clone(),
                effect: HermMat::hermitize((&e.psi * e.psi.adjoint()) * C64::new(e.weight, 0.0)),
            })
            .collect();
        Ok(OutcomeLaw { n_params, atoms })
    }
}

impl OutcomeLaw {
    /// `tr(E tau)` per atom.
    pub fn weights(&self, tau: &HermMat) -> Vec<f64> {
        self.atoms.iter().map(|a| a.effect.hs_inner(tau)).collect()
    }

    /// `sum_x x tr(E_x tau)`.
    pub fn expectation(&self, tau: &HermMat) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params];
        for (atom, w) in self.atoms.iter().zip(self.weights(tau)) {
            for (o, x) in out.iter_mut().zip(&atom.outcome) {
                *o += w * x;
            }
        }
        out
    }

    /// Second moment `sum_x x x^T tr(E_x rho)`.
    pub fn second_moment(&self, rho: &HermMat) -> RMat {
        let n = self.n_params;
        let mut v = RMat::zeros(n, n);
        for (atom, w) in self.atoms.iter().zip(self.weights(rho)) {
            let x = DVector::from_column_slice(&atom.outcome);
            v += (&x * x.transpose()) * w;
        }
        crate::linalg::symmetrize(&v)
    }

    /// `R_jk = sum_x x_j tr(E_x D_k)`; the identity for a locally unbiased
    /// measurement.
    pub fn response(&self, model: &QuantumModel) -> RMat {
        let n = self.n_params;
        let mut r = RMat::zeros(n, n);
        for (k, dk) in model.derivs().iter().enumerate() {
            for (atom, w) in self.atoms.iter().zip(self.weights(dk)) {
                for j in 0..n {
                    r[(j, k)] += atom.outcome[j] * w;
                }
            }
        }
        r
    }

    /// `sum_x tr(E_x a(x))` with `a(x) = sum_k (a x)_k D_k`. For a locally
    /// unbiased measurement this is `tr a` for every `a`.
    pub fn unbiasedness_functional(&self, model: &QuantumModel, a: &RMat) -> f64 {
        (a * self.response(model)).trace()
    }

    /// `sum_x g(x, x) tr(E_x rho)`.
    pub fn deviation(&self, rho: &HermMat, g: &WeightForm) -> f64 {
        self.atoms
            .iter()
            .zip(self.weights(rho))
            .map(|(atom, w)| g.quad(&atom.outcome) * w)
            .sum()
    }

    /// Outcome probabilities at `rho`, validated and renormalized.
    pub fn probabilities(&self, rho: &HermMat) -> Result<Vec<f64>> {
        let mut p = Vec::with_capacity(self.atoms.len());
        for w in self.weights(rho) {
            p.push(check_prob(w, "outcome probability")?);
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "outcome probabilities sum to {total:.6e}"
            )));
        }
        Ok(p.into_iter().map(|v| v / total).collect())
    }
}

/// `sum_x x tr(E_x tau)` for the plan.
pub fn exact_expectation(plan: &RandomMeasurementPlan, tau: &HermMat) -> Result<Vec<f64>> {
    Ok(plan.law()?.expectation(tau))
}

/// Covariance at the plan's state, from the spectral data.
pub fn exact_covariance(plan: &RandomMeasurementPlan) -> Result<RMat> {
    Ok(plan.law()?.second_moment(&plan.rho))
}

/// Deviation `sum_x g(x, x) tr(E_x rho)` of any measurement.
pub fn deviation(m: &impl Measurement, rho: &HermMat, g: &WeightForm) -> Result<f64> {
    Ok(m.law()?.deviation(rho, g))
}

/// `max_jk |R_jk - delta_jk|` for the response matrix.
pub fn unbiasedness_residual(m: &impl Measurement, model: &QuantumModel) -> Result<f64> {
    let r = m.law()?.response(model);
    let n = r.nrows();
    Ok((r - RMat::identity(n, n)).iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

#[derive(Debug, Clone)]
pub struct SampleStats {
    pub n_samples: usize,
    pub mean: Vec<f64>,
    /// Raw second moment `E[y y^T]`, the covariance of a mean-zero law.
    pub second_moment: RMat,
    /// Sample covariance with the empirical mean removed.
    pub cov: RMat,
    /// Standard error of each entry of `second_moment`.
    pub stderr: RMat,
    /// Standard error of each entry of `mean`.
    pub mean_stderr: Vec<f64>,
}

#[derive(Clone)]
struct Moments {
    count: usize,
    s1: Vec<f64>,
    s2: RMat,
    s4: RMat,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments {
            count: 0,
            s1: vec![0.0; n],
            s2: RMat::zeros(n, n),
            s4: RMat::zeros(n, n),
        }
    }

    fn push(&mut self, y: &[f64]) {
        let n = y.len();
        self.count += 1;
        for i in 0..n {
            self.s1[i] += y[i];
            for j in 0..n {
                let p = y[i] * y[j];
                self.s2[(i, j)] += p;
                self.s4[(i, j)] += p * p;
            }
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        self.count += other.count;
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += b;
        }
        self.s2 += &other.s2;
        self.s4 += &other.s4;
        self
    }
}

/// Draws `n_samples` outcomes of `m` at state `rho`.
pub fn sample(m: &impl Measurement, rho: &HermMat, n_samples: usize, seed: u64) -> Result<SampleStats> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let law = m.law()?;
    let probs = law.probabilities(rho)?;
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let n = law.n_params;
    let chunks = n_samples.div_ceil(CHUNK);
    let base = Xoshiro256PlusPlus::seed_from_u64(seed);
    let draw_chunk = |c: usize| {
        let mut rng = base.clone();
        for _ in 0..c {
            rng.jump();
        }
        let count = CHUNK.min(n_samples - c * CHUNK);
        let mut mom = Moments::new(n);
        for _ in 0..count {
            let u: f64 = rng.gen::<f64>() * acc;
            let k = cumulative
                .partition_point(|&c| c <= u)
                .min(law.atoms.len() - 1);
            mom.push(&law.atoms[k].outcome);
        }
        mom
    };
    let parts: Vec<Moments> = crate::duallp::oracle::pool()
        .install(|| (0..chunks).into_par_iter().map(draw_chunk).collect());
    let total = parts
        .iter()
        .fold(Moments::new(n), |acc, part| acc.merge(part));

    let nf = total.count as f64;
    let mean: Vec<f64> = total.s1.iter().map(|v| v / nf).collect();
    let second_moment = &total.s2 / nf;
    let mut cov = second_moment.clone();
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] -= mean[i] * mean[j];
        }
    }
    if total.count > 1 {
        cov *= nf / (nf - 1.0);
    }
    let stderr = RMat::from_fn(n, n, |i, j| {
        let m2 = second_moment[(i, j)];
        ((total.s4[(i, j)] / nf - m2 * m2).max(0.0) / nf).sqrt()
    });
    let mean_stderr = (0..n)
        .map(|i| ((second_moment[(i, i)] - mean[i] * mean[i]).max(0.0) / nf).sqrt())
        .collect();
    Ok(SampleStats {
        n_samples,
        mean,
        second_moment,
        cov,
        stderr,
        mean_stderr,
    })
}
