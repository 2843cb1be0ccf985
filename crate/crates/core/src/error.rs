use thiserror::Error;

use crate::mm_core::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: invalid metric measure space: {}", join(.violations))]
    InvalidSpace { op: &'static str, violations: Vec<Violation> },

    #[error("{op}: invalid {field}: {reason}")]
    InvalidInput {
        op: &'static str,
        field: &'static str,
        reason: String,
    },

    #[error("{op}: instance too large for exact enumeration ({size} > cap {cap}); {hint}")]
    TooLarge {
        op: &'static str,
        size: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("{op}: internal invariant violated: {detail}")]
    Internal { op: &'static str, detail: String },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: crate::rational::ParseRationalError,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(op: &'static str, field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput { op, field, reason: reason.into() }
}
