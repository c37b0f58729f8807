use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("numerical error: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },
    #[error("undersampled circle: integer residual {residual:.3e}")]
    UndersampledCircle { residual: f64 },
    #[error("compatibility error: {0}")]
    Compatibility(String),
    #[error("constraint error: worst pairing residual {worst_residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Constraint { worst_residual: f64, tolerance: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("clearance error: {0}")]
    Clearance(String),
    #[error("cover budget exceeded: jump length {jump_length:.6e} > bound {bound:.6e}")]
    CoverBudget { jump_length: f64, bound: f64 },
    #[error("{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
