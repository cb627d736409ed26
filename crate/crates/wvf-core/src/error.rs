use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown state ordinal {0}")]
    UnknownState(usize),
    #[error("unknown action ordinal {0}")]
    UnknownAction(usize),
    #[error("unknown goal state {0}")]
    UnknownGoal(usize),

    #[error("invalid layout: {}", issues.join("; "))]
    InvalidLayout { issues: Vec<String> },

    #[error("map parse error at line {line}: {message}")]
    MapParse { line: usize, message: String },

    #[error("table parse error at line {line}: {message}")]
    TableParse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value iteration did not converge within {sweeps} sweeps (residual {residual})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("stepping a terminated episode state")]
    EpisodeTerminated,

    #[error("table index maps do not match: {0}")]
    IndexMapMismatch(String),

    #[error("expression parse error at byte {at}: {message}")]
    ExprParse { at: usize, message: String },

    #[error("negation requires SUP/INF context tables")]
    MissingAlgebraContext,

    #[error("unknown table identifier '{0}' in expression")]
    UnknownTable(String),

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
