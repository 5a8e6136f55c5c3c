//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frequency {omega:e} rad/s outside tabulated range [{lo:e}, {hi:e}]")]
    Range { omega: f64, lo: f64, hi: f64 },
    #[error("perfect mirror is a limit material; use the dedicated limit formulas")]
    LimitMaterial,
    #[error("insulator expansion unsupported: {0}")]
    UnsupportedExpansion(String),
    #[error("ingestion error at row {row}: {msg}")]
    Ingestion { row: usize, msg: String },
    #[error("special function saturated at order {l}, |z| = {abs_z:e}")]
    Saturation { l: usize, abs_z: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ill-conditioned block at omega = {omega:e} rad/s, m = {m} (condition estimate {cond:e})")]
    Conditioning { omega: f64, m: i32, cond: f64 },
    #[error("truncation did not converge: {0}")]
    Truncation(String),
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{label}: {source}")]
    Component { label: String, source: Box<Error> },
}

impl Error {
    /// True for errors caused by invalid input rather than numerics.
    pub fn is_validation(&self) -> bool {
        if let Error::Component { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::Config(_) | Error::Ingestion { .. } | Error::UnsupportedExpansion(_) | Error::LimitMaterial | Error::Range { .. }
        )
    }
}

impl Error {
    /// Wraps an error with the name of the term that produced it.
    pub fn labeled(self, label: impl Into<String>) -> Error {
        Error::Component {
            label: label.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
