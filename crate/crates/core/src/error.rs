use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit reports.
///
/// Variants fall into three classes (see [`ErrorClass`]) which the CLI maps
/// onto its exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A text record that could not be parsed at all.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally wrong file (missing header, bad chunk layout, ...).
    #[error("format: {0}")]
    Format(String),

    #[error("bad magic bytes {found:?}, expected {expected:?}")]
    BadMagic {
        found: Vec<u8>,
        expected: &'static [u8],
    },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated input: need {expected} bytes, have {found}")]
    Truncated { expected: u64, found: u64 },

    /// Parsed fine, but the value breaks an invariant.
    #[error("{0}")]
    Invalid(String),

    #[error("unknown technique `{name}` (vocabulary: {vocabulary})")]
    UnknownTechnique { name: String, vocabulary: String },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("sample rate mismatch: {what} must be {expected} Hz, got {found} Hz")]
    SampleRate {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Validation,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Parse => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Io => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Parse => "parse",
            ErrorClass::Validation => "validation",
            ErrorClass::Io => "io",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. }
            | Error::Format(_)
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion(_)
            | Error::Truncated { .. } => ErrorClass::Parse,
            Error::Invalid(_)
            | Error::UnknownTechnique { .. }
            | Error::LengthMismatch { .. }
            | Error::SampleRate { .. } => ErrorClass::Validation,
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
