//! Lagrange dual of the deviation minimization over locally unbiased
//! measurements.
//!
//! Maximize `Spur(a, S) = tr a + tr S` subject to
//! `g(x, x) rho - S - a(x) >= 0` for every tangent `x`, where
//! `a(x) = sum_k (a x)_k D_k`. Any feasible pair lower-bounds the deviation
//! `tr(g V)` of every locally unbiased measurement.
//!
//! The semi-infinite constraint is relaxed to finitely many rank-one cuts
//! `<psi| . |psi>` at sampled `x`, giving a linear master problem. The master
//! is re-solved after each round of cuts from the separation [`oracle`]. The
//! final point is verified by an independent oracle run and shifted by
//! `S <- S - delta I` so that the returned certificate is feasible.

pub mod lp;
pub mod oracle;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, sym_eig, sym_min_eig, CMat, HermMat, RMat, C64};
use crate::model::{FisherData, QuantumModel, WeightForm};
use crate::randbound::{optimal_w, random_bound};

pub use lp::{lp_solve, lp_solve_with, LpOptions, LpProblem, LpSolution, LpStatus, PivotRule};
pub use oracle::{constraint_operator, Cut, Oracle, OracleResult};

/// Dual feasible point with its objective and verified margin.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// Endomorphism of tangent coordinates.
    pub a: RMat,
    pub s: HermMat,
    /// `tr a + tr S`.
    pub spur: f64,
    /// Most negative `lambda_min R(a, S; x)` found by the verification oracle.
    pub feasibility_margin: f64,
    pub rounds: usize,
}

impl DualCertificate {
    pub fn new(a: RMat, s: HermMat, feasibility_margin: f64, rounds: usize) -> Self {
        let spur = a.trace() + s.trace();
        DualCertificate {
            a,
            s,
            spur,
            feasibility_margin,
            rounds,
        }
    }

    pub fn is_valid(&self, eps_feas: f64) -> bool {
        self.feasibility_margin >= -eps_feas
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            a: crate::io::rmat_to_rows(&self.a),
            s: crate::io::herm_to_rows(&self.s),
            spur: self.spur,
            margin: self.feasibility_margin,
            rounds: self.rounds,
        }
    }
}

/// Wire format `{ "a", "S", "spur", "margin", "rounds" }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    pub s: crate::io::ComplexRows,
    pub spur: f64,
    pub margin: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct DualOptions {
    pub eps_feas: f64,
    pub max_rounds: usize,
    /// Oracle multistarts per round; `None` means `8 (n + 1)`.
    pub starts: Option<usize>,
    pub seed: u64,
    /// Verification uses this many times the per-round starts.
    pub verify_factor: usize,
    /// At most this many new oracle minimizers are turned into cuts per round.
    pub cuts_per_round: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions {
            eps_feas: 1e-8,
            max_rounds: 200,
            starts: None,
            seed: 0,
            verify_factor: 10,
            cuts_per_round: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStatus {
    Converged,
    /// Round budget exhausted; the certificate is still repaired and valid.
    MaxRounds,
}

/// Everything a cutting-plane run produces.
#[derive(Debug, Clone)]
pub struct DualSolve {
    pub certificate: DualCertificate,
    pub status: DualStatus,
    /// Master objective after each round; nonincreasing.
    pub history: Vec<f64>,
    /// Objective of the last master before repair.
    pub master_objective: f64,
    /// Shift `delta` applied by the repair step.
    pub repair_shift: f64,
    /// Cut pool of the last master problem.
    pub cuts: Vec<Cut>,
    /// Multiplier of each cut in the last master (in the cut's own scaling).
    pub cut_weights: Vec<f64>,
}

/// Largest entrywise difference between normalized master rows treated
/// as the same cut.
const NEAR_DUPLICATE: f64 = 1e-6;

/// Variable layout of the master LP: `a` row-major, then `diag S`, then
/// `(Re S_ij, Im S_ij)` for `i < j`.
struct Layout {
    n: usize,
    d: usize,
}

impl Layout {
    fn n_vars(&self) -> usize {
        self.n * self.n + self.d * self.d
    }

    fn a_index(&self, k: usize, j: usize) -> usize {
        k * self.n + j
    }

    fn s_offset(&self) -> usize {
        self.n * self.n
    }

    fn unpack(&self, z: &[f64]) -> (RMat, HermMat) {
        let n = self.n;
        let d = self.d;
        let a = RMat::from_fn(n, n, |k, j| z[self.a_index(k, j)]);
        let mut s = CMat::zeros(d, d);
        let base = self.s_offset();
        for i in 0..d {
            s[(i, i)] = C64::new(z[base + i], 0.0);
        }
        let mut idx = base + d;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = C64::new(z[idx], z[idx + 1]);
                s[(i, j)] = v;
                s[(j, i)] = v.conj();
                idx += 2;
            }
        }
        (a, HermMat::hermitize(s))
    }

    /// Row of `<psi|S|psi> + d^T a x <= q r`.
    fn cut_row(&self, cut: &Cut) -> Vec<f64> {
        let n = self.n;
        let d = self.d;
        let mut row = vec![0.0; self.n_vars()];
        for k in 0..n {
            for j in 0..n {
                row[self.a_index(k, j)] = cut.x[j] * cut.d[k];
            }
        }
        let base = self.s_offset();
        let psi = &cut.psi;
        for i in 0..d {
            row[base + i] = psi[i].norm_sqr();
        }
        let mut idx = base + d;
        for i in 0..d {
            for j in (i + 1)..d {
                let c = psi[i].conj() * psi[j];
                row[idx] = 2.0 * c.re;
                row[idx + 1] = -2.0 * c.im;
                idx += 2;
            }
        }
        row
    }
}

/// Box half-widths `(a, S)` from the compactness bounds
/// `||a||_o <= 4 n ||g||_o` and `||S||_1 <= 4 n^2 ||g||_o`, with a safety
/// factor of two. `||.||_o` is the operator norm in the Fisher metric, so the
/// coordinate box for `a` also carries `sqrt(cond J)`.
pub fn box_bounds(fisher: &FisherData, g: &RMat) -> Result<(f64, f64)> {
    let n = fisher.n_params() as f64;
    let jis = crate::linalg::sym_inv_sqrt(&fisher.j)?;
    let (gv, _) = sym_eig(&(&jis * g * &jis));
    let g_op = gv.last().copied().unwrap_or(0.0).max(0.0);
    let (jv, _) = sym_eig(&fisher.j);
    let cond = jv.last().copied().unwrap_or(1.0) / jv[0];
    Ok((8.0 * n * g_op * cond.sqrt(), 8.0 * n * n * g_op))
}

fn initial_cuts(model: &QuantumModel, fisher: &FisherData, g: &RMat) -> Vec<Cut> {
    let n = model.n_params();
    let d = model.dim();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut x = vec![0.0; n];
            x[k] = sign;
            xs.push(x);
        }
    }
    let (_, fv) = sym_eig(&fisher.j);
    for k in 0..n {
        for sign in [1.0, -1.0] {
            xs.push(fv.column(k).iter().map(|v| sign * v).collect());
        }
    }
    let mut psis: Vec<DVector<C64>> = Vec::new();
    let e = model.rho_eigen();
    for k in 0..d {
        psis.push(e.vector(k));
    }
    for dk in model.derivs() {
        let e = eig_hermitian(dk);
        for k in 0..d {
            psis.push(e.vector(k));
        }
    }
    let mut cuts = Vec::new();
    for x in &xs {
        for psi in &psis {
            cuts.push(Cut::new(model, g, x.clone(), psi.clone()));
        }
    }
    // x = 0 against a tomographically complete family keeps S bounded above.
    let zero = vec![0.0; n];
    let unit = |i: usize| DVector::from_fn(d, |k, _| C64::new(if k == i { 1.0 } else { 0.0 }, 0.0));
    let mut tomo: Vec<DVector<C64>> = (0..d).map(unit).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            for phase in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)] {
                tomo.push(unit(i) + unit(j) * phase);
            }
        }
    }
    for psi in tomo.into_iter().chain(psis) {
        cuts.push(Cut::new(model, g, zero.clone(), psi));
    }
    cuts
}

fn check_inputs(model: &QuantumModel, fisher: &FisherData, g: &WeightForm) -> Result<()> {
    let n = model.n_params();
    if fisher.n_params() != n || g.dim() != n {
        return Err(Error::InvalidInput(format!(
            "model has {n} parameters, Fisher data {}, weight {}",
            fisher.n_params(),
            g.dim()
        )));
    }
    Ok(())
}

/// Cutting-plane solution of the dual problem.
///
/// Returns a repaired certificate even when the round budget runs out; the
/// status then reads [`DualStatus::MaxRounds`].
pub fn dual_bound(
    model: &QuantumModel,
    fisher: &FisherData,
    g: &WeightForm,
    opts: DualOptions,
) -> Result<DualSolve> {
    check_inputs(model, fisher, g)?;
    if g.min_eigenvalue() <= 0.0 {
        return Err(Error::DegenerateWeight(
            "the dual solver needs a positive definite weight".into(),
        ));
    }
    let n = model.n_params();
    let d = model.dim();
    let gm = g.matrix();
    let layout = Layout { n, d };
    let (box_a, box_s) = box_bounds(fisher, gm)?;
    let nv = layout.n_vars();
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    for i in 0..nv {
        let b = if i < layout.s_offset() { box_a } else { box_s };
        lower[i] = -b;
        upper[i] = b;
    }
    let mut objective = vec![0.0; nv];
    for k in 0..n {
        objective[layout.a_index(k, k)] = 1.0;
    }
    for i in 0..d {
        objective[layout.s_offset() + i] = 1.0;
    }
    let mut master = LpProblem::new(objective, lower, upper);
    let mut cuts: Vec<Cut> = Vec::new();
    let mut scales: Vec<f64> = Vec::new();
    let push_cut = |master: &mut LpProblem, cuts: &mut Vec<Cut>, scales: &mut Vec<f64>, cut: Cut| {
        let row = layout.cut_row(&cut);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let row: Vec<f64> = row.iter().map(|v| v / norm).collect();
        let rhs = cut.q * cut.r / norm;
        // A near copy of an existing row makes the master degenerate; the
        // newer cut takes its place instead.
        let twin = master.rows.iter().zip(&master.rhs).position(|(r, b)| {
            (b - rhs).abs() <= NEAR_DUPLICATE && r.iter().zip(&row).all(|(u, v)| (u - v).abs() <= NEAR_DUPLICATE)
        });
        match twin {
            Some(i) => {
                master.rows[i] = row;
                master.rhs[i] = rhs;
                scales[i] = norm;
                cuts[i] = cut;
            }
            None => {
                master.add_row(row, rhs);
                scales.push(norm);
                cuts.push(cut);
            }
        }
    };
    for cut in initial_cuts(model, fisher, gm) {
        push_cut(&mut master, &mut cuts, &mut scales, cut);
    }

    let starts = opts.starts.unwrap_or(8 * (n + 1));
    let oracle = Oracle::new(model, gm);
    let mut history = Vec::new();
    let mut status = DualStatus::MaxRounds;
    let mut last: Option<(RMat, HermMat, LpSolution, usize)> = None;
    let mut rounds = 0;
    for round in 0..opts.max_rounds.max(1) {
        let sol = lp_solve(&master)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Numerical(format!(
                "master LP ended with status {:?} in round {round}",
                sol.status
            )));
        }
        history.push(sol.objective);
        let (a, s) = layout.unpack(&sol.x);
        rounds = round + 1;
        let pool_size = cuts.len();
        let found = oracle.candidates(&a, &s, starts, oracle::stream_seed(opts.seed, round as u64));
        let converged = found[0].constraint_value >= -opts.eps_feas;
        last = Some((a.clone(), s.clone(), sol, pool_size));
        if converged {
            status = DualStatus::Converged;
            break;
        }
        if round + 1 == opts.max_rounds.max(1) {
            break;
        }
        let mut added: Vec<Cut> = Vec::new();
        for cand in found.iter().filter(|c| c.constraint_value < -opts.eps_feas) {
            if added.len() >= opts.cuts_per_round {
                break;
            }
            if added.iter().any(|c| same_cut(c, &cand.cut)) {
                continue;
            }
            added.push(cand.cut.clone());
            // Every negative direction of R at this x is violated as well.
            let e = eig_hermitian(&constraint_operator(model, gm, &a, &s, &cand.cut.x));
            for k in 1..d {
                if e.eigenvalues[k] < -opts.eps_feas {
                    added.push(Cut::new(model, gm, cand.cut.x.clone(), e.vector(k)));
                }
            }
        }
        for cut in added {
            push_cut(&mut master, &mut cuts, &mut scales, cut);
        }
    }

    let (a, s, sol, pool_size) = last.expect("at least one round");
    let master_objective = sol.objective;
    let verify_starts = starts * opts.verify_factor.max(1);
    let verify_seed = oracle::stream_seed(opts.seed ^ 0xA5A5_5A5A_DEAD_BEEF, u64::MAX);
    let margin = oracle.run(&a, &s, verify_starts, verify_seed).constraint_value;
    let delta = (-margin).max(0.0);
    let s = s.axpy(-delta, &HermMat::identity(d));
    let certificate = DualCertificate::new(a, s, margin + delta, rounds);

    let cut_weights = sol
        .duals
        .iter()
        .zip(&scales)
        .take(pool_size)
        .map(|(y, norm)| y / norm)
        .collect();
    cuts.truncate(pool_size);
    Ok(DualSolve {
        certificate,
        status,
        history,
        master_objective,
        repair_shift: delta,
        cuts,
        cut_weights,
    })
}

fn same_cut(a: &Cut, b: &Cut) -> bool {
    let dx: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let overlap = a.psi.dotc(&b.psi).norm();
    dx <= 1e-8 * (1.0 + a.x.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        && overlap >= 1.0 - 1e-10
}

/// Closed-form certificate for a random model with `X rho X = K` on every
/// unit cotangent `X`: `a = 2 c^2 W`, `S = -c^2 K` with `c = tr sqrt(J^{-1} g)`.
pub fn random_model_certificate(
    model: &QuantumModel,
    fisher: &FisherData,
    g: &WeightForm,
    k: &HermMat,
    verify_starts: usize,
    seed: u64,
) -> Result<DualCertificate> {
    check_inputs(model, fisher, g)?;
    let w = optimal_w(&fisher.j, g.matrix())?;
    let c2 = random_bound(&fisher.j, g.matrix())?;
    let a = &w * (2.0 * c2);
    let s = k.scale(-c2);
    let oracle = Oracle::new(model, g.matrix());
    let margin = oracle.run(&a, &s, verify_starts, seed).constraint_value;
    Ok(DualCertificate::new(a, s, margin, 0))
}

/// The full-qubit certificate with `K = I - rho`.
pub fn qubit_certificate(
    model: &QuantumModel,
    fisher: &FisherData,
    g: &WeightForm,
) -> Result<DualCertificate> {
    if model.dim() != 2 || model.n_params() != 3 {
        return Err(Error::InvalidInput(
            "the closed-form certificate needs the full three-parameter qubit model".into(),
        ));
    }
    let k = HermMat::identity(2).sub(model.rho());
    random_model_certificate(model, fisher, g, &k, 8 * 4 * 10, 0)
}

/// One POVM element `weight |psi><psi|` reporting `x`.
#[derive(Debug, Clone)]
pub struct RecoveredElement {
    pub weight: f64,
    pub x: Vec<f64>,
    pub psi: DVector<C64>,
}

/// Measurement reconstructed from the master LP multipliers.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub elements: Vec<RecoveredElement>,
    /// `||sum_c mu_c |psi_c><psi_c| - I||_F`.
    pub povm_residual: f64,
    /// `max_jk |sum_c mu_c x_cj <psi_c|D_k|psi_c> - delta_jk|`.
    pub unbiasedness_residual: f64,
    /// `|sum_c mu_c <psi_c|rho|psi_c> x_c|`, the mean at `rho`.
    pub mean_residual: f64,
    /// `sum_c mu_c g(x_c, x_c) <psi_c|rho|psi_c>`.
    pub deviation: f64,
}

/// Complementary-slackness reading of the master LP: the multipliers of the
/// active cuts form a candidate POVM. Residuals are reported, not certified.
pub fn recover_measurement(
    model: &QuantumModel,
    g: &WeightForm,
    cuts: &[Cut],
    weights: &[f64],
) -> Recovery {
    let d = model.dim();
    let n = model.n_params();
    let mut povm = CMat::zeros(d, d);
    let mut response = RMat::zeros(n, n);
    let mut mean = vec![0.0; n];
    let mut deviation = 0.0;
    let mut elements = Vec::new();
    for (cut, &mu) in cuts.iter().zip(weights) {
        if !(mu > 0.0) {
            continue;
        }
        povm += (&cut.psi * cut.psi.adjoint()) * C64::new(mu, 0.0);
        for j in 0..n {
            for k in 0..n {
                response[(j, k)] += mu * cut.x[j] * cut.d[k];
            }
            mean[j] += mu * cut.r * cut.x[j];
        }
        deviation += mu * g.quad(&cut.x) * cut.r;
        elements.push(RecoveredElement {
            weight: mu,
            x: cut.x.clone(),
            psi: cut.psi.clone(),
        });
    }
    let povm_residual = crate::linalg::frobenius(&(povm - CMat::identity(d, d)));
    let unbiasedness_residual = (&response - RMat::identity(n, n))
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let mean_residual = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    Recovery {
        elements,
        povm_residual,
        unbiasedness_residual,
        mean_residual,
        deviation,
    }
}

/// `lambda_max(S)`, which the `x = 0` constraint forces to be `<= 0`.
pub fn s_top_eigenvalue(s: &HermMat) -> f64 {
    eig_hermitian(s).max()
}

#[doc(hidden)]
pub fn min_eig_real(m: &RMat) -> f64 {
    sym_min_eig(m)
}
