//! One error type for every command. Each failure carries a stable kebab-case
//! code that maps to its own process exit status.

use std::fmt;
use std::io;
use std::path::Path;

use scholar_core::authority::AuthorityError;
use scholar_core::circuits::CircuitError;
use scholar_core::identity::IdentityError;
use scholar_core::ledger::LedgerError;
use scholar_core::selection::SelectionError;
use scholar_core::student::StudentError;

/// `(code, exit status)`. Statuses are unique; 0 is success.
pub const EXIT_CODES: &[(&str, u8)] = &[
    ("missing-file", 1),
    ("config", 2),
    ("usage", 3),
    ("malformed-input", 4),
    ("locked", 5),
    ("bad-key", 6),
    ("exists", 7),
    ("io", 8),
    ("unknown-scholarship", 10),
    ("duplicate-scholarship", 11),
    ("not-registered", 12),
    ("window-closed", 13),
    ("arity-mismatch", 14),
    ("unknown-ca-key", 15),
    ("total-out-of-range", 16),
    ("proof-invalid", 17),
    ("duplicate-application", 18),
    ("too-early", 19),
    ("not-admin", 20),
    ("already-set", 21),
    ("unknown-tier", 22),
    ("roots-not-set", 23),
    ("bad-proof", 24),
    ("already-claimed", 25),
    ("replay", 26),
    ("authorization-denied", 30),
    ("not-found", 31),
    ("invalid-score", 32),
    ("empty-tuples", 40),
    ("overflow", 41),
    ("missing-dimension", 42),
    ("tuple-invalid", 43),
    ("not-applied", 44),
    ("not-awarded", 45),
    ("kyc-incomplete", 50),
    ("malformed-key", 51),
    ("malformed-did", 52),
    ("empty-claims", 53),
    ("invalid-validity", 54),
    ("missing-salt", 55),
    ("unknown-claim", 56),
    ("invalid-claim", 57),
    ("unsatisfied", 60),
    ("key-mismatch", 61),
    ("circuit-usage", 62),
    ("empty-tree", 70),
    ("index-out-of-range", 71),
    ("content-not-found", 72),
    ("content-tampered", 73),
    ("malformed-list", 74),
    ("store-io", 75),
    ("root-mismatch", 80),
    ("incomplete", 81),
];

/// Status for codes missing from the table; never expected in practice.
pub const UNMAPPED_EXIT: u8 = 99;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub detail: String,
}

impl CliError {
    pub fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        exit_code_for(self.code)
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        let code = if err.kind() == io::ErrorKind::NotFound {
            "missing-file"
        } else {
            "io"
        };
        Self::new(code, format!("{}: {err}", path.display()))
    }

    pub fn malformed(path: &Path, err: impl fmt::Display) -> Self {
        Self::new("malformed-input", format!("{}: {err}", path.display()))
    }
}

pub fn exit_code_for(code: &str) -> u8 {
    EXIT_CODES
        .iter()
        .find(|(c, _)| *c == code)
        .map_or(UNMAPPED_EXIT, |(_, status)| *status)
}

/// `error: code=<code> detail=<text>` on a single line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = self.detail.replace(['\n', '\r'], " ");
        write!(f, "error: code={} detail={}", self.code, detail)
    }
}

impl std::error::Error for CliError {}

impl From<IdentityError> for CliError {
    fn from(e: IdentityError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Identity(inner) => inner.into(),
            other => Self::new(other.code(), other.to_string()),
        }
    }
}

impl From<AuthorityError> for CliError {
    fn from(e: AuthorityError) -> Self {
        match e {
            AuthorityError::Identity(inner) => inner.into(),
            AuthorityError::Circuit(inner) => inner.into(),
            other => Self::new(other.code(), other.to_string()),
        }
    }
}

impl From<StudentError> for CliError {
    fn from(e: StudentError) -> Self {
        match e {
            StudentError::Circuit(inner) => inner.into(),
            StudentError::Selection(inner) => inner.into(),
            other => Self::new(other.code(), other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
