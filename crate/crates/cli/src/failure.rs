//! Exit codes and the JSON error document written on every failure.

use std::fmt;

use serde::Serialize;
use serde_json::Value;

use spbe_core::SolveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// I/O failures and anything unexpected.
    Internal,
    /// Malformed or invalid game or policy documents.
    ParseError,
    NoFixedPoint,
    VerificationFailure,
    ResourceLimit,
    /// Bad flag values or flag combinations.
    Usage,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Internal => 1,
            Kind::ParseError => 2,
            Kind::NoFixedPoint => 3,
            Kind::VerificationFailure => 4,
            Kind::ResourceLimit => 5,
            Kind::Usage => 64,
        }
    }
}

pub const EXIT_CODE_TABLE: &str = "\
Exit codes:
  0   success
  1   internal or I/O error
  2   parse error (malformed or invalid game or policy document)
  3   no_fixed_point (some stage solve failed)
  4   verification failure (certificate did not pass)
  5   resource-limit refusal (cache budget or enumeration limit)
  64  usage error (bad flags)

On failure a JSON error document {\"error\": {kind, exit_code, message, details}}
is written to --error-out, or as the last line of stderr.";

/// A failure with a known exit code. Travels inside `anyhow::Error`.
#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
    pub details: Value,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Failure {
            kind,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn from_solve_error(err: &SolveError) -> Self {
        let kind = if err.is_resource_limit() {
            Kind::ResourceLimit
        } else if matches!(err, SolveError::NoFixedPoint { .. }) {
            Kind::NoFixedPoint
        } else {
            Kind::Internal
        };
        Failure::new(kind, err.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: Kind,
    exit_code: i32,
    message: String,
    details: &'a Value,
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    error: ErrorBody<'a>,
}

/// Classifies an error chain and renders its error document.
pub fn render(err: &anyhow::Error) -> (i32, String) {
    let null = Value::Null;
    let (kind, details) = match err.chain().find_map(|e| e.downcast_ref::<Failure>()) {
        Some(f) => (f.kind, &f.details),
        None => (Kind::Internal, &null),
    };
    let doc = ErrorDocument {
        error: ErrorBody {
            kind,
            exit_code: kind.exit_code(),
            message: format!("{err:#}"),
            details,
        },
    };
    let text = serde_json::to_string(&doc).expect("error documents always serialize");
    (kind.exit_code(), text)
}
