use crate::linalg::SymMatrix;

/// Errors shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch: {context} (expected {expected}, found {found})")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not symmetric: max |A - A^T| = {max_asymmetry:e} exceeds tolerance {tolerance:e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("symmetric eigensolver did not converge after {iterations} sweeps")]
    EigenNoConvergence { iterations: usize },

    #[error("class {label} has no observations")]
    EmptyClass { label: usize },

    #[error("scatter matrix {which} is singular; add observations or a ridge term (need n*c > r and n*r > c)")]
    SingularScatter { which: &'static str },

    #[error("graphical lasso problem is unbounded below: {reason}")]
    GlassoUnbounded { reason: String },

    #[error(
        "graphical lasso did not reach tolerance after {iterations} iterations (KKT residual {residual:e})"
    )]
    GlassoMaxIter {
        iterations: usize,
        residual: f64,
        best: Box<SymMatrix>,
    },

    #[error(
        "forced-equal mean entry violated: classes ({class_a},{class_b}) differ at entry ({row},{col})"
    )]
    ForcedEqualViolated {
        class_a: usize,
        class_b: usize,
        row: usize,
        col: usize,
    },

    #[error("model {model} covariance is not positive definite{}",
        .min_eigenvalue.map(|v| format!(" (min eigenvalue {v:e})")).unwrap_or_default())]
    NonPositiveDefiniteSigma {
        model: &'static str,
        min_eigenvalue: Option<f64>,
    },

    #[error("every tuning grid cell failed to fit")]
    AllCellsFailed,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
