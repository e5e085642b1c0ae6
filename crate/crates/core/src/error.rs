use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not stable (max real part of spectrum {max_real:.3e})")]
    NotStable { max_real: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Sylvester operator is singular: |lambda_i(A) + lambda_j(B)| = {gap:.3e}")]
    SingularPencil { gap: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("resolvent (i*omega*I - A) is singular at omega = {omega}")]
    SingularResolvent { omega: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point is off the manifold: {0}")]
    ManifoldViolation(String),

    #[error("degenerate truncation: sigma_r - sigma_(r+1) = {gap:.3e} is below tolerance")]
    DegenerateTruncation { gap: f64 },

    #[error("{what} did not converge")]
    NoConvergence { what: &'static str },

    #[error("parse error{}: {message}", location(.line, .field))]
    Parse {
        message: String,
        line: Option<usize>,
        field: Option<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn location(line: &Option<usize>, field: &Option<String>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" at line {l}, field `{f}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// True for failures caused by bad input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::Domain(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::ManifoldViolation(_)
        )
    }
}
