//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical non-convergence,
//! 3 degenerate or infeasible model. A non-converged dual run still prints
//! its report, with a repaired (valid) certificate, before exiting with 2.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::duallp::{dual_bound, DualOptions, DualStatus};
use crate::error::{Error, Result};
use crate::io::{herm_to_rows, load_covariance, load_model, load_weight, rmat_to_rows, to_json};
use crate::model::fisher;
use crate::randbound::{build_plan, limit_membership, limit_membership_2param, random_bound, random_report};
use crate::randcheck::check_randomness;
use crate::sim::{exact_covariance, sample};

#[derive(Debug, Parser)]
#[command(name = "qcrb", version, about = "Attainable Cramér-Rao type bounds for quantum statistical models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Random,
    Dual,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimensions, state spectrum, SLDs and Fisher matrix.
    Info {
        #[arg(long)]
        model: PathBuf,
    },
    /// Random-measurement bound, dual certificate and SLD bound.
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        weight: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
        /// Feasibility tolerance of the dual solver.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Also write the dual certificate to this file.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Test whether X rho X is the same for every unit cotangent X.
    CheckRandom {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = crate::randcheck::DEFAULT_TOL)]
        tol: f64,
    },
    /// Exact versus Monte Carlo covariance of the optimal random measurement.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        weight: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Is a covariance matrix in the limit set of random measurements?
    Limit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cov: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

/// Text to print and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            stdout,
            stderr: String::new(),
            code: 0,
        }
    }

    fn error(e: &Error) -> Self {
        Outcome {
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            code: e.exit_code(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                Outcome::ok(text)
            } else {
                Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code,
                }
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Info { model } => info(model),
        Command::Bound {
            model,
            weight,
            method,
            tol,
            seed,
            max_rounds,
            format,
            certificate,
        } => bound(
            model,
            weight,
            *method,
            DualOptions {
                eps_feas: *tol,
                max_rounds: *max_rounds,
                seed: *seed,
                ..DualOptions::default()
            },
            *format,
            certificate.as_deref(),
        ),
        Command::CheckRandom { model, tol } => check_random(model, *tol),
        Command::Simulate {
            model,
            weight,
            samples,
            seed,
        } => simulate(model, weight, *samples, *seed),
        Command::Limit { model, cov, tol } => limit(model, cov, *tol),
    };
    match result {
        Ok(out) => out,
        Err(e) => Outcome::error(&e),
    }
}

fn info(path: &Path) -> Result<Outcome> {
    let model = load_model(path)?;
    let f = fisher(&model)?;
    let report = json!({
        "dim": model.dim(),
        "n_params": model.n_params(),
        "names": model.names(),
        "rho_eigenvalues": model.rho_eigen().eigenvalues,
        "slds": f.slds.iter().map(herm_to_rows).collect::<Vec<_>>(),
        "J": rmat_to_rows(&f.j),
        "J_min_eigenvalue": f.min_eigenvalue(),
    });
    Ok(Outcome::ok(to_json(&report) + "\n"))
}

#[derive(Debug, Serialize)]
struct Gaps {
    random_minus_dual: Option<f64>,
    random_minus_sld: Option<f64>,
    dual_minus_sld: Option<f64>,
}

fn bound(
    model_path: &Path,
    weight_path: &Path,
    method: Method,
    opts: DualOptions,
    format: Format,
    certificate_path: Option<&Path>,
) -> Result<Outcome> {
    if !(opts.eps_feas > 0.0) {
        return Err(Error::InvalidInput("--tol must be positive".into()));
    }
    let model = load_model(model_path)?;
    let g = load_weight(weight_path)?;
    let f = fisher(&model)?;
    if g.dim() != model.n_params() {
        return Err(Error::InvalidInput(format!(
            "weight is {}x{} but the model has {} parameters",
            g.dim(),
            g.dim(),
            model.n_params()
        )));
    }
    let sld = f.sld_bound(g.matrix());

    let mut random_value = None;
    let mut random_json = Value::Null;
    if method != Method::Dual {
        let b = random_bound(&f.j, g.matrix())?;
        random_value = Some(b);
        random_json = match random_report(&f.j, g.matrix()) {
            Ok(r) => serde_json::to_value(r).expect("report serializes"),
            Err(Error::DegenerateWeight(_)) => json!({ "bound": b, "W": null, "V": null, "method": "random" }),
            Err(e) => return Err(e),
        };
    }

    let mut dual_value = None;
    let mut dual_json = Value::Null;
    let mut converged = true;
    if method != Method::Random {
        let solve = dual_bound(&model, &f, &g, opts)?;
        converged = solve.status == DualStatus::Converged;
        let cert = &solve.certificate;
        dual_value = Some(cert.spur);
        dual_json = json!({
            "spur": cert.spur,
            "margin": cert.feasibility_margin,
            "rounds": cert.rounds,
            "status": solve.status,
            "repair_shift": solve.repair_shift,
        });
        if let Some(p) = certificate_path {
            std::fs::write(p, to_json(&cert.to_json()) + "\n")
                .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display())))?;
        }
    }

    let gaps = Gaps {
        random_minus_dual: random_value.zip(dual_value).map(|(r, d)| r - d),
        random_minus_sld: random_value.map(|r| r - sld),
        dual_minus_sld: dual_value.map(|d| d - sld),
    };
    let stdout = match format {
        Format::Json => {
            let report = json!({
                "random": random_json,
                "dual": dual_json,
                "sld_bound": sld,
                "gap": gaps,
            });
            to_json(&report) + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["quantity", "value"]).map_err(csv_error)?;
            let rows = [
                ("random_bound", random_value),
                ("dual_spur", dual_value),
                ("sld_bound", Some(sld)),
                ("random_minus_dual", gaps.random_minus_dual),
                ("random_minus_sld", gaps.random_minus_sld),
                ("dual_minus_sld", gaps.dual_minus_sld),
            ];
            for (name, v) in rows {
                let cell = v.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([name, cell.as_str()]).map_err(csv_error)?;
            }
            csv_string(w)?
        }
    };
    let code = if converged { 0 } else { 2 };
    let stderr = if converged {
        String::new()
    } else {
        "warning: dual solver hit the round limit; the certificate was repaired and is still a valid lower bound\n"
            .to_string()
    };
    Ok(Outcome { stdout, stderr, code })
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv output failed: {e}"))
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn check_random(path: &Path, tol: f64) -> Result<Outcome> {
    let model = load_model(path)?;
    let f = fisher(&model)?;
    let report = check_randomness(&model, &f, tol)?;
    let mut stderr = String::new();
    if report.borderline {
        stderr = format!(
            "warning: residual {:.3e} is within a factor 10 of the tolerance\n",
            report.max_residual
        );
    }
    Ok(Outcome {
        stdout: to_json(&report) + "\n",
        stderr,
        code: 0,
    })
}

fn simulate(model_path: &Path, weight_path: &Path, samples: usize, seed: u64) -> Result<Outcome> {
    let model = load_model(model_path)?;
    let g = load_weight(weight_path)?;
    let f = fisher(&model)?;
    let plan = build_plan(&model, &f, &g)?;
    let exact = exact_covariance(&plan)?;
    let stats = sample(&plan, model.rho(), samples, seed)?;
    let n = model.n_params();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["component_i", "component_j", "exact", "empirical", "stderr"])
        .map_err(csv_error)?;
    for i in 0..n {
        for j in 0..n {
            w.write_record([
                i.to_string(),
                j.to_string(),
                exact[(i, j)].to_string(),
                stats.second_moment[(i, j)].to_string(),
                stats.stderr[(i, j)].to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    Ok(Outcome::ok(csv_string(w)?))
}

fn limit(model_path: &Path, cov_path: &Path, tol: f64) -> Result<Outcome> {
    let model = load_model(model_path)?;
    let v = load_covariance(cov_path)?;
    let f = fisher(&model)?;
    if v.nrows() != model.n_params() || v.ncols() != model.n_params() {
        return Err(Error::InvalidInput(format!(
            "covariance must be {n}x{n}",
            n = model.n_params()
        )));
    }
    let m = limit_membership(&v, &f.j, tol)?;
    let mut report = serde_json::to_value(&m).expect("report serializes");
    if model.n_params() == 2 {
        let m2 = limit_membership_2param(&v, &f.j, tol)?;
        report["two_param"] = json!({
            "member": m2.member,
            "X": rmat_to_rows(&m2.witness),
            "det": m2.det,
        });
    }
    Ok(Outcome::ok(to_json(&report) + "\n"))
}
