//! Dense two-phase primal simplex in inequality form.
//!
//! The iterate is a point `x` together with a linearly independent set of
//! tight constraints (the active set). At a vertex the active set plays the
//! role of the nonbasic variables of a dictionary, and leaving the active set
//! is an entering pivot. Directions and multipliers come from a QR
//! factorization of the active normals, recomputed from the original rows on
//! every step, so there is no accumulated tableau drift. A step costs
//! `O(rows * vars + vars^3)`, which suits the cutting-plane master: a few
//! dozen variables and hundreds of rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `maximize c^T x  s.t.  A x <= b,  lower <= x <= upper`.
///
/// Bounds may be infinite. The search starts from the box point nearest
/// the origin; phase one runs only if that point violates a row.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        LpProblem {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            lower,
            upper,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidInput("bound vectors do not match variable count".into()));
        }
        if self.rows.len() != self.rhs.len() || self.rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("constraint rows do not match variable count".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("bad bounds [{l}, {u}] on variable {j}")));
            }
        }
        let finite = self.objective.iter().chain(self.rhs.iter()).all(|x| x.is_finite())
            && self.rows.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite LP data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One nonnegative multiplier per constraint row.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest-label choice on both sides of the pivot. Never cycles.
    Bland,
    /// Most negative multiplier, smallest-label ratio ties. Can cycle.
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub rule: PivotRule,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            rule: PivotRule::Bland,
            max_iterations: 100_000,
        }
    }
}

/// Multipliers above `-OPT_TOL * scale` count as nonnegative.
const OPT_TOL: f64 = 1e-11;
/// Multipliers this small relative to the largest one are rounding noise
/// (large multipliers come from nearly dependent active normals).
const LAMBDA_NOISE: f64 = 1e-12;
/// A dropped constraint must see `a . d` below `-AWAY_TOL |a| |d|`; this
/// only has to beat rounding in the product.
const AWAY_TOL: f64 = 1e-13;
/// Relative size of `a . d` below which a constraint does not block.
const PIVOT_TOL: f64 = 1e-10;
/// Ratio ties, relative.
const RATIO_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
/// Phase-one restarts after a phase-two run ends infeasible.
const MAX_RESUMES: usize = 3;
/// Relative size of the projected objective treated as zero.
const NULL_TOL: f64 = 1e-12;
/// Pivots below this relative size get an explicit independence check.
const SPAN_CHECK: f64 = 1e-6;
/// Relative distance from the active span below which a normal counts as
/// dependent.
const DEPENDENT_TOL: f64 = 1e-9;
/// Largest restoring correction, relative to `max |x_j|`.
const RESTORE_TOL: f64 = 1e-8;

/// Minimum ratio among `(label, slack, rate)` triples, where the step to
/// constraint `label` is `slack / rate`; ties go to the smallest label.
fn ratio_choice(blocking: &[(usize, f64, f64)]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &(label, slack, rate) in blocking {
        let step = slack / rate;
        best = match best {
            None => Some((label, step)),
            Some((bl, bs)) => {
                let tie = (step - bs).abs() <= RATIO_TOL * (1.0 + bs.abs());
                if (step < bs && !tie) || (tie && label < bl) {
                    Some((label, step))
                } else {
                    Some((bl, bs))
                }
            }
        };
    }
    best
}

pub fn lp_solve(p: &LpProblem) -> Result<LpSolution> {
    lp_solve_with(p, LpOptions::default())
}

pub fn lp_solve_with(p: &LpProblem, opts: LpOptions) -> Result<LpSolution> {
    p.validate()?;
    let n = p.n_vars();
    let mut start: Vec<f64> = (0..n).map(|j| 0f64.clamp(p.lower[j], p.upper[j])).collect();
    let mut iterations = 0;
    let scale_b = 1.0 + p.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let prob = Problem {
        rows: &p.rows,
        rhs: &p.rhs,
        lower: &p.lower,
        upper: &p.upper,
        c: &p.objective,
    };
    // A phase-two run that drifts off the feasible set is resumed from its
    // end point through phase one; this is rare and converges in one pass.
    for _ in 0..=MAX_RESUMES {
        let worst = prob.worst_violation(&start);
        if worst > FEAS_TOL * scale_b {
            match phase_one(p, &start, worst, opts, &mut iterations)? {
                Ok(x) => start = x,
                Err(status) => return Ok(failed(p, status, iterations)),
            }
        }
        let out = prob.run(start, opts, &mut iterations);
        if out.status != LpStatus::Optimal {
            return Ok(failed(p, out.status, iterations));
        }
        if prob.worst_violation(&out.x) > FEAS_TOL * scale_b {
            start = out.x;
            continue;
        }
        let mut duals = vec![0.0; p.rows.len()];
        for (&label, &l) in out.active.iter().zip(&out.multipliers) {
            if label >= 2 * n {
                duals[label - 2 * n] = l.max(0.0);
            }
        }
        let objective = dot(&p.objective, &out.x);
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x: out.x,
            objective,
            duals,
            iterations,
        });
    }
    Err(Error::Numerical("simplex could not keep its iterate feasible".into()))
}

/// Maximizes `-s` subject to `A x - s <= b`, `s >= 0` from `(start, worst)`.
/// Returns the `x` part, or the status to report when no feasible point
/// was reached.
fn phase_one(
    p: &LpProblem,
    start: &[f64],
    worst: f64,
    opts: LpOptions,
    iterations: &mut usize,
) -> Result<std::result::Result<Vec<f64>, LpStatus>> {
    let n = p.n_vars();
    let scale_b = 1.0 + p.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rows: Vec<Vec<f64>> = p
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push(-1.0);
            r
        })
        .collect();
    let mut lower = p.lower.clone();
    lower.push(0.0);
    let mut upper = p.upper.clone();
    upper.push(f64::INFINITY);
    let mut objective = vec![0.0; n];
    objective.push(-1.0);
    let aux = Problem {
        rows: &rows,
        rhs: &p.rhs,
        lower: &lower,
        upper: &upper,
        c: &objective,
    };
    let mut x = start.to_vec();
    x.push(worst);
    let out = aux.run(x, opts, iterations);
    match out.status {
        LpStatus::Optimal => {}
        LpStatus::IterationLimit => return Ok(Err(LpStatus::IterationLimit)),
        _ => return Err(Error::Numerical("phase one left its bounded region".into())),
    }
    if out.x[n] > FEAS_TOL * scale_b {
        return Ok(Err(LpStatus::Infeasible));
    }
    Ok(Ok(out.x[..n].to_vec()))
}

fn failed(p: &LpProblem, status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        x: vec![f64::NAN; p.n_vars()],
        objective: f64::NAN,
        duals: vec![0.0; p.rows.len()],
        iterations,
    }
}

/// `v` minus its projection on the columns of `q`, applied twice so that
/// the result stays orthogonal to `q` even when it is small.
fn project_out(q: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if q.ncols() == 0 {
        return v.clone();
    }
    let once = v - q * (q.transpose() * v);
    &once - q * (q.transpose() * &once)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Constraint labels: `j` is `-x_j <= -lower_j`, `n + j` is
/// `x_j <= upper_j`, and `2n + i` is row `i`.
struct Problem<'a> {
    rows: &'a [Vec<f64>],
    rhs: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
    c: &'a [f64],
}

struct RunOutput {
    status: LpStatus,
    x: Vec<f64>,
    active: Vec<usize>,
    multipliers: Vec<f64>,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn exists(&self, label: usize) -> bool {
        let n = self.n();
        if label < n {
            self.lower[label].is_finite()
        } else if label < 2 * n {
            self.upper[label - n].is_finite()
        } else {
            true
        }
    }

    fn normal(&self, label: usize) -> Vec<f64> {
        let n = self.n();
        if label < 2 * n {
            let mut v = vec![0.0; n];
            v[label % n] = if label < n { -1.0 } else { 1.0 };
            v
        } else {
            self.rows[label - 2 * n].clone()
        }
    }

    fn dot_normal(&self, label: usize, v: &[f64]) -> f64 {
        let n = self.n();
        if label < n {
            -v[label]
        } else if label < 2 * n {
            v[label - n]
        } else {
            dot(&self.rows[label - 2 * n], v)
        }
    }

    fn norm(&self, label: usize) -> f64 {
        if label < 2 * self.n() {
            1.0
        } else {
            self.rows[label - 2 * self.n()].iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }

    fn rhs(&self, label: usize) -> f64 {
        let n = self.n();
        if label < n {
            -self.lower[label]
        } else if label < 2 * n {
            self.upper[label - n]
        } else {
            self.rhs[label - 2 * n]
        }
    }

    fn in_active_span(&self, label: usize, q: &DMatrix<f64>) -> bool {
        let a = DVector::from_vec(self.normal(label));
        project_out(q, &a).norm() <= DEPENDENT_TOL * a.norm()
    }

    /// Largest row violation at `x`, unnormalized.
    fn worst_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(self.rhs)
            .map(|(r, b)| dot(r, x) - b)
            .fold(0.0_f64, f64::max)
    }

    fn n_labels(&self) -> usize {
        2 * self.n() + self.rows.len()
    }

    /// Thin QR of the active normals as columns.
    fn factor(&self, active: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n();
        let k = active.len();
        let mut m = DMatrix::zeros(n, k);
        for (col, &label) in active.iter().enumerate() {
            for (i, v) in self.normal(label).into_iter().enumerate() {
                m[(i, col)] = v;
            }
        }
        let qr = m.qr();
        (qr.q(), qr.r())
    }

    fn run(&self, mut x: Vec<f64>, opts: LpOptions, iterations: &mut usize) -> RunOutput {
        let n = self.n();
        let c = DVector::from_column_slice(self.c);
        let c_norm = c.norm().max(1e-300);
        // Bounds already tight at the start; distinct variables, so independent.
        let mut active: Vec<usize> = (0..n)
            .filter_map(|j| {
                if self.lower[j].is_finite() && x[j] == self.lower[j] {
                    Some(j)
                } else if self.upper[j].is_finite() && x[j] == self.upper[j] {
                    Some(n + j)
                } else {
                    None
                }
            })
            .collect();
        active.sort_unstable();
        loop {
            if *iterations >= opts.max_iterations {
                return RunOutput {
                    status: LpStatus::IterationLimit,
                    x,
                    active,
                    multipliers: Vec::new(),
                };
            }
            let (q, r) = self.factor(&active);
            self.restore_active(&mut x, &active, &q, &r);
            let qtc = q.transpose() * &c;
            let d = project_out(&q, &c);
            let (direction, q) = if d.norm() > NULL_TOL * c_norm {
                (d, q)
            } else {
                // c lies in the span of the active normals.
                let lambda = r
                    .solve_upper_triangular(&qtc)
                    .unwrap_or_else(|| DVector::zeros(active.len()));
                // A negative multiplier is trusted only if dropping its
                // constraint yields a direction that leaves that constraint;
                // on a nearly dependent active set the sign can be noise.
                let mut rejected: Vec<usize> = Vec::new();
                loop {
                    let leave = self.choose_leaving(&active, &lambda, c_norm, opts.rule, &rejected);
                    let Some(pos) = leave else {
                        return RunOutput {
                            status: LpStatus::Optimal,
                            x,
                            active,
                            multipliers: lambda.iter().copied().collect(),
                        };
                    };
                    let mut reduced = active.clone();
                    let label = reduced.remove(pos);
                    let (q, _) = self.factor(&reduced);
                    let d = project_out(&q, &c);
                    let d_norm = d.norm();
                    let dv: Vec<f64> = d.iter().copied().collect();
                    let away = self.dot_normal(label, &dv) < -AWAY_TOL * self.norm(label) * d_norm;
                    if d_norm > NULL_TOL * c_norm && away {
                        active = reduced;
                        break (d, q);
                    }
                    rejected.push(pos);
                }
            };
            *iterations += 1;
            let dv: Vec<f64> = direction.iter().copied().collect();
            let d_norm = direction.norm();
            let blocking: Vec<(usize, f64, f64)> = (0..self.n_labels())
                .filter(|&label| self.exists(label) && !active.contains(&label))
                .filter_map(|label| {
                    let ad = self.dot_normal(label, &dv) / (self.norm(label) * d_norm);
                    if ad <= PIVOT_TOL {
                        return None;
                    }
                    // A normal in the span of the active ones cannot block, and
                    // admitting it would make the active set singular.
                    if ad < SPAN_CHECK && self.in_active_span(label, &q) {
                        return None;
                    }
                    let slack = (self.rhs(label) - self.dot_normal(label, &x)).max(0.0) / self.norm(label);
                    Some((label, slack, ad * d_norm))
                })
                .collect();
            let Some((label, step)) = ratio_choice(&blocking) else {
                return RunOutput {
                    status: LpStatus::Unbounded,
                    x,
                    active,
                    multipliers: Vec::new(),
                };
            };
            for (xi, di) in x.iter_mut().zip(&dv) {
                *xi += step * di;
            }
            let pos = active.partition_point(|&l| l < label);
            active.insert(pos, label);
        }
    }

    /// Least-squares correction putting `x` back on the active constraints.
    /// Only drift-sized corrections are applied; a large one means the
    /// active normals are nearly dependent and the solve is not trustworthy.
    fn restore_active(&self, x: &mut [f64], active: &[usize], q: &DMatrix<f64>, r: &DMatrix<f64>) {
        if active.is_empty() {
            return;
        }
        let resid = DVector::from_iterator(
            active.len(),
            active.iter().map(|&l| self.rhs(l) - self.dot_normal(l, x)),
        );
        let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some(y) = r.transpose().solve_lower_triangular(&resid) {
            let delta = q * y;
            if delta.iter().all(|v| v.is_finite()) && delta.amax() <= RESTORE_TOL * scale {
                for (xi, di) in x.iter_mut().zip(delta.iter()) {
                    *xi += di;
                }
            }
        }
        for (j, xi) in x.iter_mut().enumerate() {
            *xi = xi.clamp(self.lower[j], self.upper[j]);
        }
    }

    fn choose_leaving(
        &self,
        active: &[usize],
        lambda: &DVector<f64>,
        c_norm: f64,
        rule: PivotRule,
        rejected: &[usize],
    ) -> Option<usize> {
        let tol = OPT_TOL * c_norm;
        let noise = LAMBDA_NOISE * lambda.amax();
        let mut best: Option<usize> = None;
        for (pos, &l) in lambda.iter().enumerate() {
            if rejected.contains(&pos) || l >= -tol * self.norm(active[pos]).recip() || l >= -noise {
                continue;
            }
            best = match (best, rule) {
                (None, _) => Some(pos),
                (Some(b), PivotRule::Bland) => Some(if active[pos] < active[b] { pos } else { b }),
                (Some(b), PivotRule::Dantzig) => Some(if l < lambda[b] { pos } else { b }),
            };
        }
        best
    }

}
