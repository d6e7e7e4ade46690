use thiserror::Error;

/// Which model invariant a candidate model failed.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDefect {
    /// `tr rho` differs from one.
    Trace(f64),
    /// `rho` has an eigenvalue below the PSD tolerance.
    NotPsd(f64),
    /// Derivative `index` has nonzero trace.
    NotTraceless { index: usize, trace: f64 },
    /// Derivative `index` has weight on the kernel of `rho`.
    OffSupport { index: usize, weight: f64 },
    /// The derivatives are linearly dependent (smallest Gram eigenvalue given).
    Dependent(f64),
    /// The Fisher matrix is not positive definite.
    SingularFisher(f64),
    /// Shapes do not agree.
    Shape(String),
}

impl std::fmt::Display for ModelDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelDefect::Trace(t) => write!(f, "trace of rho is {t}, expected 1"),
            ModelDefect::NotPsd(l) => write!(f, "rho is not positive semidefinite (eigenvalue {l:.3e})"),
            ModelDefect::NotTraceless { index, trace } => {
                write!(f, "derivative {index} is not traceless (trace {trace:.3e})")
            }
            ModelDefect::OffSupport { index, weight } => write!(
                f,
                "derivative {index} is not supported on supp(rho) (kernel weight {weight:.3e})"
            ),
            ModelDefect::Dependent(l) => {
                write!(f, "derivatives are linearly dependent (min Gram eigenvalue {l:.3e})")
            }
            ModelDefect::SingularFisher(l) => {
                write!(f, "Fisher matrix is not positive definite (min eigenvalue {l:.3e})")
            }
            ModelDefect::Shape(s) => write!(f, "shape mismatch: {s}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("derivative leaves the support of rho (kernel weight {0:.3e})")]
    OffSupport(f64),
    #[error("invalid model: {0}")]
    InvalidModel(ModelDefect),
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::NotHermitian(_) => 1,
            Error::Numerical(_) => 2,
            Error::NotPsd(_)
            | Error::OffSupport(_)
            | Error::InvalidModel(_)
            | Error::DegenerateWeight(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
