//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::Instant;

use common::*;
use qcrb::duallp::{
    dual_bound, lp_solve, lp_solve_with, qubit_certificate, DualOptions, DualSolve, LpOptions, LpProblem, LpStatus,
    PivotRule,
};
use qcrb::linalg::{inverse, sym_min_eig, symmetrize, RMat};
use qcrb::model::{classical_model, fisher, qubit_full, FisherData, QuantumModel, WeightForm};
use qcrb::randbound::{
    build_plan, limit_membership, limit_membership_2param, plan_covariance, random_bound, random_report,
    RandomMeasurementPlan,
};
use qcrb::randcheck::{check_randomness, identity_residual, DEFAULT_TOL};
use qcrb::sim::{self, exact_covariance, sample, Measurement};
use rand::Rng;

struct Instance {
    label: String,
    model: QuantumModel,
    fisher: FisherData,
    g: WeightForm,
    w: RMat,
    plan: RandomMeasurementPlan,
}

impl Instance {
    fn new(label: String, model: QuantumModel, g: RMat, w: Option<RMat>) -> Instance {
        let fisher = fisher(&model).unwrap();
        let g = WeightForm::new(g).unwrap();
        let plan = build_plan(&model, &fisher, &g).unwrap();
        let w = w.unwrap_or_else(|| plan.w.clone());
        Instance {
            label,
            model,
            fisher,
            g,
            w,
            plan,
        }
    }
}

#[derive(Default)]
struct Suite {
    normalized: Vec<Instance>,
    qubits: Vec<(Instance, DualSolve)>,
}

type Check = Result<String, String>;
type Criterion = fn(&mut Suite) -> Check;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normalized_suite() -> Vec<Instance> {
    let mut rng = rng(0x5eed_0001);
    let mut out = Vec::new();
    for i in 0..50 {
        let d = [2, 3, 4][i % 3];
        let n = [1, 2, 3][(i / 3) % 3];
        let model = random_model(&mut rng, d, n);
        let j = fisher(&model).unwrap().j;
        for k in 0..5 {
            let w = random_w(&mut rng, &j);
            let g = normalized_weight(&j, &w);
            out.push(Instance::new(format!("model {i} (d={d}, n={n}) W#{k}"), model.clone(), g, Some(w)));
        }
    }
    out
}

fn criterion_1(s: &mut Suite) -> Check {
    s.normalized = normalized_suite();
    let mut worst_bound = 0.0_f64;
    let mut worst_dev = 0.0_f64;
    for inst in &s.normalized {
        let b = random_bound(&inst.fisher.j, inst.g.matrix()).unwrap();
        let dev = sim::deviation(&inst.plan, inst.model.rho(), &inst.g).unwrap();
        worst_bound = worst_bound.max((b - 1.0).abs());
        worst_dev = worst_dev.max((dev - 1.0).abs());
        ensure((b - 1.0).abs() <= 1e-9, || format!("{}: bound {b}", inst.label))?;
        ensure((dev - 1.0).abs() <= 1e-9, || format!("{}: deviation {dev}", inst.label))?;
        ensure(max_abs(&(&inst.plan.w - &inst.w)) <= 1e-8, || {
            format!("{}: plan W differs from the generating W", inst.label)
        })?;
    }
    Ok(format!(
        "{} instances, max |bound-1| {worst_bound:.1e}, max |deviation-1| {worst_dev:.1e}",
        s.normalized.len()
    ))
}

fn qubit_suite() -> Vec<Instance> {
    let mut rng = rng(0x5eed_0002);
    let mut out = Vec::new();
    for alpha in [0.0, 0.3, 0.5, 0.9] {
        let model = qubit_full(alpha).unwrap();
        let j = fisher(&model).unwrap().j;
        let pd = random_spd(&mut rng, 3, 0.2, 2.0);
        for (name, g) in [("I", RMat::identity(3, 3)), ("J", j.clone()), ("random", pd)] {
            out.push(Instance::new(format!("alpha={alpha} g={name}"), model.clone(), g, None));
        }
    }
    out
}

fn criterion_2(s: &mut Suite) -> Check {
    let mut worst_gap = 0.0_f64;
    let mut worst_closed = 0.0_f64;
    let mut min_margin = f64::INFINITY;
    for inst in qubit_suite() {
        let bound = random_bound(&inst.fisher.j, inst.g.matrix()).unwrap();
        let solve = dual_bound(&inst.model, &inst.fisher, &inst.g, DualOptions::default()).unwrap();
        let spur = solve.certificate.spur;
        let gap = (spur - bound).abs();
        worst_gap = worst_gap.max(gap / bound.max(1.0));
        ensure(gap <= f64::max(1e-3, 1e-3 * bound), || {
            format!("{}: dual {spur} vs random {bound}", inst.label)
        })?;
        let closed = qubit_certificate(&inst.model, &inst.fisher, &inst.g).unwrap();
        worst_closed = worst_closed.max((closed.spur - bound).abs());
        min_margin = min_margin.min(closed.feasibility_margin);
        ensure((closed.spur - bound).abs() <= 1e-9, || {
            format!("{}: closed-form spur {} vs {bound}", inst.label, closed.spur)
        })?;
        ensure(closed.feasibility_margin >= -1e-9, || {
            format!("{}: closed-form margin {}", inst.label, closed.feasibility_margin)
        })?;
        s.qubits.push((inst, solve));
    }
    Ok(format!(
        "{} qubit cases, max relative dual gap {worst_gap:.1e}, closed-form error {worst_closed:.1e}, min margin {min_margin:.1e}",
        s.qubits.len()
    ))
}

fn criterion_3(_: &mut Suite) -> Check {
    let model = qubit_full(0.5).unwrap();
    let f = fisher(&model).unwrap();
    let g = RMat::identity(3, 3);
    let b = random_bound(&f.j, &g).unwrap();
    let oracle = projected_gradient_bound(&f.j, &g, 5000);
    let closed = (2.0 + 0.75f64.sqrt()).powi(2);
    let sld = f.sld_bound(&g);
    ensure((b - 8.2141016151).abs() <= 1e-8, || format!("random bound {b}"))?;
    ensure((oracle - 8.2141016151).abs() <= 1e-8, || format!("projected-gradient oracle {oracle}"))?;
    ensure((b - closed).abs() <= 1e-12, || format!("closed form {closed} vs {b}"))?;
    ensure((sld - 2.75).abs() <= 1e-14, || format!("SLD bound {sld}"))?;
    Ok(format!("random {b:.10}, oracle {oracle:.10}, SLD {sld}"))
}

fn criterion_4(_: &mut Suite) -> Check {
    let mut rng = rng(0x5eed_0004);
    let mut worst = 0.0_f64;
    for alpha in [0.0, 0.3, -0.3, 0.9, -0.9] {
        let model = qubit_full(alpha).unwrap();
        let f = fisher(&model).unwrap();
        let target = qcrb::HermMat::identity(2).sub(model.rho());
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = identity_residual(&model, &f, &x, &target);
            worst = worst.max(r);
            ensure(r <= 1e-11, || format!("alpha={alpha}: residual {r:.2e} at {x:?}"))?;
        }
    }
    Ok(format!("250 directions, max residual {worst:.1e}"))
}

fn criterion_5(s: &mut Suite) -> Check {
    let mut worst_exact = 0.0_f64;
    let mut worst_z = 0.0_f64;
    for (idx, inst) in s.normalized.iter().enumerate() {
        let exact = exact_covariance(&inst.plan).unwrap();
        let formula = plan_covariance(&inst.plan);
        let direct = inverse(&inst.w).unwrap() * inverse(&inst.fisher.j).unwrap();
        let e = max_abs(&(&exact - &formula)).max(max_abs(&(&exact - &direct)));
        worst_exact = worst_exact.max(e);
        ensure(e <= 1e-9, || format!("{}: exact covariance off by {e:.2e}", inst.label))?;

        let stats = sample(&inst.plan, inst.model.rho(), 100_000, 1000 + idx as u64).unwrap();
        let n = inst.fisher.n_params();
        for a in 0..n {
            for b in 0..n {
                let diff = (stats.second_moment[(a, b)] - exact[(a, b)]).abs();
                let se = stats.stderr[(a, b)];
                if se > 0.0 {
                    worst_z = worst_z.max(diff / se);
                }
                ensure(diff <= 5.0 * se + 1e-12, || {
                    format!("{}: entry ({a},{b}) off by {diff:.3e} with stderr {se:.3e}", inst.label)
                })?;
            }
        }
    }
    Ok(format!(
        "{} plans, max exact error {worst_exact:.1e}, max |z| {worst_z:.2}",
        s.normalized.len()
    ))
}

/// Deviations of several exactly unbiased measurements for `inst.g`.
fn unbiased_deviations(inst: &Instance, rng: &mut TestRng) -> Vec<f64> {
    let mut out = vec![sim::deviation(&inst.plan, inst.model.rho(), &inst.g).unwrap()];
    let n = inst.fisher.n_params();
    for _ in 0..3 {
        let other = WeightForm::new(random_spd(rng, n, 0.1, 3.0)).unwrap();
        let plan = build_plan(&inst.model, &inst.fisher, &other).unwrap();
        out.push(sim::deviation(&plan, inst.model.rho(), &inst.g).unwrap());
    }
    out
}

fn criterion_6(s: &mut Suite) -> Check {
    let mut rng = rng(0x5eed_0006);
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    let opts = DualOptions {
        max_rounds: 8,
        ..DualOptions::default()
    };
    for inst in &s.normalized {
        let solve = dual_bound(&inst.model, &inst.fisher, &inst.g, opts).unwrap();
        for dev in unbiased_deviations(inst, &mut rng) {
            let excess = solve.certificate.spur - dev;
            worst = worst.max(excess);
            ensure(excess <= 1e-9, || {
                format!("{}: spur {} exceeds deviation {dev}", inst.label, solve.certificate.spur)
            })?;
            checked += 1;
        }
    }
    for (inst, solve) in &s.qubits {
        for dev in unbiased_deviations(inst, &mut rng) {
            let excess = solve.certificate.spur - dev;
            worst = worst.max(excess);
            ensure(excess <= 1e-9, || {
                format!("{}: spur {} exceeds deviation {dev}", inst.label, solve.certificate.spur)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} certificate/measurement pairs, max spur - deviation {worst:.2e}"))
}

fn criterion_7(_: &mut Suite) -> Check {
    let third = 1.0 / 3.0;
    let model = classical_model(&[third, third, third], &[vec![0.1, -0.1, 0.0], vec![0.1, 0.1, -0.2]]).unwrap();
    let f = fisher(&model).unwrap();
    let g = WeightForm::identity(2);
    let solve = dual_bound(&model, &f, &g, DualOptions::default()).unwrap();
    let target = f.j_inv().trace();
    let spur = solve.certificate.spur;
    ensure((spur - target).abs() <= 1e-3, || format!("dual {spur} vs tr J^-1 {target}"))?;
    let report = check_randomness(&model, &f, DEFAULT_TOL).unwrap();
    ensure(!report.is_random, || "checker reports a random model".into())?;
    ensure(report.max_residual > 10.0 * DEFAULT_TOL, || {
        format!("residual {} not above 10 tol", report.max_residual)
    })?;
    Ok(format!(
        "dual {spur:.8} vs tr J^-1 {target:.8}, randomness residual {:.3}",
        report.max_residual
    ))
}

fn criterion_8(_: &mut Suite) -> Check {
    let mut rng = rng(0x5eed_0008);
    let mut members = 0;
    let mut agreements = 0;
    for i in 0..200 {
        let n = 2 + i % 2;
        let model = random_model(&mut rng, 2 + i % 3, n);
        let j = fisher(&model).unwrap().j;
        let w = random_w(&mut rng, &j);
        let v = symmetrize(&(inverse(&w).unwrap() * inverse(&j).unwrap()));
        let m = limit_membership(&v, &j, 1e-9).unwrap();
        ensure(m.member, || format!("instance {i}: W^-1 J^-1 rejected (trace {})", m.trace))?;
        members += 1;
        if n == 2 {
            // Members and perturbed non-members must be classified alike.
            let scale = rng.gen_range(0.5..2.0);
            let other = random_spd(&mut rng, 2, 0.2, 3.0);
            for cand in [v.clone(), &v * scale, other] {
                let a = limit_membership(&cand, &j, 1e-9).unwrap().member;
                let b = limit_membership_2param(&cand, &j, 1e-9).unwrap().member;
                ensure(a == b, || format!("instance {i}: general {a} vs two-parameter {b}"))?;
                agreements += 1;
            }
        }
    }
    Ok(format!("{members} members accepted, {agreements} two-parameter agreements"))
}

fn random_lp(rng: &mut TestRng) -> LpProblem {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=5);
    let c = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let lower = (0..n).map(|_| rng.gen_range(-3.0..0.0)).collect();
    let upper = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let mut p = LpProblem::new(c, lower, upper);
    for _ in 0..m {
        let row = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        p.add_row(row, rng.gen_range(0.5..3.0));
    }
    p
}

fn criterion_9(_: &mut Suite) -> Check {
    let mut rng = rng(0x5eed_0009);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let p = random_lp(&mut rng);
        let sol = lp_solve(&p).unwrap();
        let oracle = vertex_enumeration(&p.objective, &p.rows, &p.rhs, &p.lower, &p.upper)
            .ok_or_else(|| format!("LP {i}: oracle found no vertex"))?;
        ensure(sol.status == LpStatus::Optimal, || format!("LP {i}: status {:?}", sol.status))?;
        let e = (sol.objective - oracle).abs();
        worst = worst.max(e);
        ensure(e <= 1e-9, || format!("LP {i}: simplex {} vs vertices {oracle}", sol.objective))?;
    }
    let cycling = cycling_instance();
    let bland = lp_solve_with(
        &cycling,
        LpOptions {
            rule: PivotRule::Bland,
            ..LpOptions::default()
        },
    )
    .unwrap();
    ensure(bland.status == LpStatus::Optimal, || format!("Bland: {:?}", bland.status))?;
    ensure((bland.objective - 1.0).abs() <= 1e-9, || format!("Bland objective {}", bland.objective))?;
    Ok(format!(
        "50 LPs, max error {worst:.1e}; Bland solves the cycling instance in {} iterations",
        bland.iterations
    ))
}

/// Degenerate instance on which the most-negative-multiplier rule with
/// smallest-index ties cycles; optimum 1 at `x = (1, 0, 1, 0)`.
fn cycling_instance() -> LpProblem {
    let inf = f64::INFINITY;
    let mut p = LpProblem::new(vec![10.0, -57.0, -9.0, -24.0], vec![0.0; 4], vec![inf; 4]);
    p.add_row(vec![0.5, -5.5, -2.5, 9.0], 0.0);
    p.add_row(vec![0.5, -1.5, -0.5, 1.0], 0.0);
    p.add_row(vec![1.0, 0.0, 0.0, 0.0], 1.0);
    p
}

fn criterion_10(s: &mut Suite) -> Check {
    let mut rng = rng(0x5eed_0010);
    let mut cases = 0;
    for i in 0..100 {
        let n = 1 + i % 3;
        let model = random_model(&mut rng, 2 + i % 3, n);
        let j = fisher(&model).unwrap().j;
        let g = random_spd(&mut rng, n, 0.1, 3.0);
        let b = random_bound(&j, &g).unwrap();
        let sld = (inverse(&j).unwrap() * &g).trace();
        ensure(b >= sld - 1e-9 * sld, || format!("dominance: {b} < {sld}"))?;

        let c = rng.gen_range(0.1..10.0);
        let bc = random_bound(&j, &(&g * c)).unwrap();
        ensure((bc - c * b).abs() <= 1e-9 * bc, || format!("scaling: {bc} vs {}", c * b))?;
        let bigger = &g + random_spd(&mut rng, n, 0.0, 1.0);
        let bb = random_bound(&j, &bigger).unwrap();
        ensure(bb >= b - 1e-9 * b, || format!("monotonicity: {bb} < {b}"))?;
        cases += 3;
    }

    let model = random_model(&mut rng, 3, 3);
    let j = fisher(&model).unwrap().j;
    let g = random_spd(&mut rng, 3, 0.1, 3.0);
    let b = random_bound(&j, &g).unwrap();
    let jinv = inverse(&j).unwrap();
    for _ in 0..500 {
        let w = random_w(&mut rng, &j);
        let val = (&g * inverse(&w).unwrap() * &jinv).trace();
        ensure(val >= b - 1e-9 * b, || format!("conic: {val} < {b}"))?;
        cases += 1;
    }
    let opt = random_report(&j, &g).unwrap();
    ensure(sym_min_eig(&symmetrize(&(&j * &opt.w))) > 0.0, || "optimal W not positive".into())?;

    let plans = s
        .normalized
        .iter()
        .map(|i| (&i.model, &i.plan))
        .chain(s.qubits.iter().map(|(i, _)| (&i.model, &i.plan)));
    for (model, plan) in plans {
        let n = plan.n_params();
        let law = plan.law().unwrap();
        for p in 0..n {
            for q in 0..n {
                let mut a = RMat::zeros(n, n);
                a[(p, q)] = 1.0;
                let val = law.unbiasedness_functional(model, &a);
                let want = a.trace();
                ensure((val - want).abs() <= 1e-9, || format!("localub: {val} vs {want}"))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} property checks, no violations"))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("normalized weight gives bound and deviation 1", criterion_1),
        ("qubit dual LP matches closed form", criterion_2),
        ("qubit alpha=0.5 bound 8.2141016151", criterion_3),
        ("L rho L = I - rho on the qubit", criterion_4),
        ("exact and Monte Carlo covariance", criterion_5),
        ("weak duality", criterion_6),
        ("commuting baseline", criterion_7),
        ("limit-set predicates", criterion_8),
        ("LP core", criterion_9),
        ("property suites", criterion_10),
    ];
    let mut suite = Suite::default();
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| check(&mut suite)))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS [{secs:.1}s] {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL [{secs:.1}s] {name}: {detail}", k + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
