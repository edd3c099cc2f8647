use thiserror::Error;

/// Errors raised while parsing, validating or evaluating collection data.
#[derive(Debug, Error)]
pub enum Error {
    /// A line or element could not be parsed. `line` is 1-based.
    #[error("{what}: parse error at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    /// Input parsed but violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("topic {0} has no documents in any run")]
    EmptyPool(String),

    #[error("topic {topic}: {needed} noise documents required but only {available} available")]
    InsufficientNoise {
        topic: String,
        needed: usize,
        available: usize,
    },

    #[error("judgments incomplete, missing {}", format_missing(.0))]
    IncompleteJudgments(Vec<(String, String, String)>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_missing(missing: &[(String, String, String)]) -> String {
    const SHOWN: usize = 10;
    let mut out = missing
        .iter()
        .take(SHOWN)
        .map(|(a, t, d)| format!("({a}, {t}, {d})"))
        .collect::<Vec<_>>()
        .join(", ");
    if missing.len() > SHOWN {
        out.push_str(&format!(" and {} more", missing.len() - SHOWN));
    }
    out
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            message: message.into(),
        }
    }

    /// Whether this error comes from bad input, as opposed to I/O.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
