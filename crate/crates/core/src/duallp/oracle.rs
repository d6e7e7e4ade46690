//! Separation oracle for `g(x, x) rho - S - a(x) >= 0`.
//!
//! The constraint is homogenized to `Q(x, t) = g(x, x) rho - t a(x) - t^2 S`
//! on the unit sphere of `(x, t)`, and `<psi|Q|psi>` is minimized by
//! alternating two exact eigenproblems: with `psi` fixed the objective is a
//! quadratic form in `(x, t)`; with `(x, t)` fixed it is a Rayleigh quotient
//! of `Q`. Each local minimum is then dehomogenized and polished on the
//! original constraint, where `x` has a closed-form minimizer for fixed `psi`.

use std::sync::OnceLock;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::linalg::{eig_hermitian, sym_eig, HermMat, RMat, C64};
use crate::model::QuantumModel;

const ALTERNATION_TOL: f64 = 1e-12;
const MAX_ALTERNATIONS: usize = 400;
const MAX_POLISH: usize = 200;
/// `|t|` below this is treated as the degenerate `t = 0` branch.
const T_FLOOR: f64 = 1e-10;

/// Rank-one linear cut `q r - <psi|S|psi> - sum_kj a_kj x_j d_k >= 0`.
#[derive(Debug, Clone)]
pub struct Cut {
    pub x: Vec<f64>,
    pub psi: DVector<C64>,
    /// `<psi|rho|psi>`.
    pub r: f64,
    /// `<psi|D_k|psi>`.
    pub d: Vec<f64>,
    /// `g(x, x)`.
    pub q: f64,
}

impl Cut {
    pub fn new(model: &QuantumModel, g: &RMat, x: Vec<f64>, psi: DVector<C64>) -> Self {
        let norm = psi.norm();
        let psi = psi / C64::new(norm, 0.0);
        let r = model.rho().expectation(&psi);
        let d = model.derivs().iter().map(|dk| dk.expectation(&psi)).collect();
        let q = quad(g, &x);
        Cut { x, psi, r, d, q }
    }

    /// Constraint value at `(a, S)`; nonnegative when the cut is satisfied.
    pub fn value(&self, a: &RMat, s: &HermMat) -> f64 {
        self.q * self.r - s.expectation(&self.psi) - a_term(a, &self.x, &self.d)
    }
}

fn quad(g: &RMat, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x[i] * g[(i, j)] * x[j];
        }
    }
    acc
}

/// `sum_kj a_kj x_j d_k = d^T a x`.
fn a_term(a: &RMat, x: &[f64], d: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for k in 0..n {
        for j in 0..n {
            acc += a[(k, j)] * x[j] * d[k];
        }
    }
    acc
}

/// `R(a, S; x) = g(x, x) rho - S - a(x)` with `a(x) = sum_k (a x)_k D_k`.
pub fn constraint_operator(model: &QuantumModel, g: &RMat, a: &RMat, s: &HermMat, x: &[f64]) -> HermMat {
    let ax = a * DVector::from_column_slice(x);
    let ax: Vec<f64> = ax.iter().copied().collect();
    model
        .rho()
        .scale(quad(g, x))
        .sub(s)
        .sub(&model.tangent(&ax))
}

/// Best point found by one oracle run.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Minimum of `<psi|Q(x, t)|psi>` over the unit sphere (homogenized).
    pub min_value: f64,
    /// Most negative `lambda_min R(a, S; x)` found after dehomogenization.
    pub constraint_value: f64,
    /// The dehomogenized cut at the minimizer.
    pub cut: Cut,
    /// The minimizer sat at `t = 0` and was perturbed before dehomogenizing.
    pub degenerate: bool,
}

/// Separation problem for a candidate multiplier `(a, S)`.
pub struct Oracle<'m> {
    model: &'m QuantumModel,
    g: RMat,
    g_inv: Option<RMat>,
}

impl<'m> Oracle<'m> {
    pub fn new(model: &'m QuantumModel, g: &RMat) -> Self {
        let (vals, _) = sym_eig(g);
        let g_inv = if vals[0] > 1e-12 * vals.last().copied().unwrap_or(1.0) {
            g.clone().try_inverse()
        } else {
            None
        };
        Oracle {
            model,
            g: g.clone(),
            g_inv,
        }
    }

    /// Runs `starts` independent alternations and returns the best.
    pub fn run(&self, a: &RMat, s: &HermMat, starts: usize, seed: u64) -> OracleResult {
        let all = self.candidates(a, s, starts, seed);
        all.into_iter()
            .next()
            .expect("at least one oracle start")
    }

    /// All local minima, most violated first (ties by start index).
    pub fn candidates(&self, a: &RMat, s: &HermMat, starts: usize, seed: u64) -> Vec<OracleResult> {
        let starts = starts.max(1);
        let mut found: Vec<(usize, OracleResult)> = pool().install(|| {
            (0..starts)
                .into_par_iter()
                .map(|i| (i, self.single(a, s, stream_seed(seed, i as u64))))
                .collect()
        });
        found.sort_by(|(i, x), (j, y)| {
            x.constraint_value
                .total_cmp(&y.constraint_value)
                .then(i.cmp(j))
        });
        found.into_iter().map(|(_, r)| r).collect()
    }

    fn single(&self, a: &RMat, s: &HermMat, seed: u64) -> OracleResult {
        let model = self.model;
        let d = model.dim();
        let n = model.n_params();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut psi = DVector::from_fn(d, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        psi /= C64::new(psi.norm(), 0.0);

        let mut xt = vec![0.0; n + 1];
        let mut value = f64::INFINITY;
        for _ in 0..MAX_ALTERNATIONS {
            xt = self.min_xt(a, s, &psi);
            let (x, t) = xt.split_at(n);
            let q = self.hom_operator(a, s, x, t[0]);
            let e = eig_hermitian(&q);
            let next = e.min();
            psi = e.vector(0);
            let done = (value - next).abs() < ALTERNATION_TOL;
            value = next;
            if done {
                break;
            }
        }
        let (x, t) = xt.split_at(n);
        let mut t = t[0];
        let degenerate = t.abs() < T_FLOOR;
        if degenerate {
            t = if t < 0.0 { -T_FLOOR } else { T_FLOOR };
        }
        let x0: Vec<f64> = x.iter().map(|v| v / t).collect();
        let (constraint_value, x_best, psi_best) = self.polish(a, s, x0, psi);
        OracleResult {
            min_value: value,
            constraint_value,
            cut: Cut::new(model, &self.g, x_best, psi_best),
            degenerate,
        }
    }

    /// Minimum eigenvector of the `(n+1)`-dimensional form
    /// `[[r g, -a^T d / 2], [-d^T a / 2, -s]]`.
    fn min_xt(&self, a: &RMat, s: &HermMat, psi: &DVector<C64>) -> Vec<f64> {
        let model = self.model;
        let n = model.n_params();
        let r = model.rho().expectation(psi);
        let dv: Vec<f64> = model.derivs().iter().map(|dk| dk.expectation(psi)).collect();
        let sv = s.expectation(psi);
        let mut m = RMat::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = r * self.g[(i, j)];
            }
            let v: f64 = (0..n).map(|k| a[(k, i)] * dv[k]).sum();
            m[(i, n)] = -0.5 * v;
            m[(n, i)] = -0.5 * v;
        }
        m[(n, n)] = -sv;
        let (_, vecs) = sym_eig(&m);
        vecs.column(0).iter().copied().collect()
    }

    fn hom_operator(&self, a: &RMat, s: &HermMat, x: &[f64], t: f64) -> HermMat {
        let model = self.model;
        let ax = a * DVector::from_column_slice(x);
        let ax: Vec<f64> = ax.iter().copied().collect();
        model
            .rho()
            .scale(quad(&self.g, x))
            .axpy(-t, &model.tangent(&ax))
            .axpy(-t * t, s)
    }

    /// Alternating minimization of `<psi|R(x)|psi>`: for fixed `psi` the
    /// minimizer is `x = g^{-1} a^T d / (2 r)`.
    fn polish(
        &self,
        a: &RMat,
        s: &HermMat,
        x0: Vec<f64>,
        psi0: DVector<C64>,
    ) -> (f64, Vec<f64>, DVector<C64>) {
        let model = self.model;
        let n = model.n_params();
        let e = eig_hermitian(&constraint_operator(model, &self.g, a, s, &x0));
        let mut best = (e.min(), x0, e.vector(0));
        let g_inv = match &self.g_inv {
            Some(gi) => gi,
            None => return best,
        };
        let mut psi = if best.0.is_finite() { best.2.clone() } else { psi0 };
        for _ in 0..MAX_POLISH {
            let r = model.rho().expectation(&psi);
            if r <= 1e-14 {
                break;
            }
            let dv: Vec<f64> = model.derivs().iter().map(|dk| dk.expectation(&psi)).collect();
            let v = DVector::from_fn(n, |i, _| (0..n).map(|k| a[(k, i)] * dv[k]).sum::<f64>());
            let x: Vec<f64> = (g_inv * v / (2.0 * r)).iter().copied().collect();
            let e = eig_hermitian(&constraint_operator(model, &self.g, a, s, &x));
            let val = e.min();
            psi = e.vector(0);
            let improved = val < best.0 - 1e-15 * (1.0 + best.0.abs());
            if val < best.0 {
                best = (val, x, psi.clone());
            }
            if !improved {
                break;
            }
        }
        best
    }
}

/// SplitMix64 step, used to derive independent stream seeds.
pub(crate) fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Oracle thread pool; `QCRB_THREADS` caps its size.
pub(crate) fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(k) = std::env::var("QCRB_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&k| k > 0)
        {
            builder = builder.num_threads(k);
        }
        builder.build().expect("oracle thread pool")
    })
}
