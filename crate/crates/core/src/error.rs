use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    MissingVariable(String),

    #[error("variable `{name}` is degenerate: {reason}")]
    DegenerateVariable { name: String, reason: String },

    #[error("fixed-effect demeaning did not converge after {sweeps} sweeps (last max change {last_delta:.3e})")]
    NoConvergence { sweeps: usize, last_delta: f64 },

    #[error("empty estimation sample; missing cells per variable: {}", format_counts(.missing))]
    EmptySample { missing: Vec<(String, usize)> },

    #[error("every regressor was dropped as collinear")]
    DegenerateDesign,

    #[error("cluster-robust covariance needs at least 2 clusters, got {0}")]
    InsufficientClusters(usize),

    #[error("coefficient `{0}` was dropped as collinear")]
    DroppedColumn(String),

    #[error("unknown coefficient `{0}`")]
    UnknownColumn(String),

    #[error("column `{0}` appears in more than one input")]
    ColumnCollision(String),

    #[error("event list is empty")]
    EmptyEvents,

    #[error("unknown specification `{0}` (known: {1})")]
    UnknownSpecification(String, String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("horizon k={horizon}: {source}")]
    Horizon {
        horizon: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// Short stable tag used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingVariable(_) => "missing-variable",
            Error::DegenerateVariable { .. } => "degenerate-variable",
            Error::NoConvergence { .. } => "no-convergence",
            Error::EmptySample { .. } => "empty-sample",
            Error::DegenerateDesign => "degenerate-design",
            Error::InsufficientClusters(_) => "insufficient-clusters",
            Error::DroppedColumn(_) => "dropped-column",
            Error::UnknownColumn(_) => "unknown-column",
            Error::ColumnCollision(_) => "column-collision",
            Error::EmptyEvents => "empty-events",
            Error::UnknownSpecification(..) => "unknown-specification",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::InvalidPanel(_) => "invalid-panel",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Horizon { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Invariant(_) => "internal",
        }
    }

    /// Process exit code: 1 for user or data problems, 2 for broken internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            Error::Horizon { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

fn format_counts(counts: &[(String, usize)]) -> String {
    if counts.is_empty() {
        return "none".to_string();
    }
    counts
        .iter()
        .map(|(name, n)| format!("{name}={n}"))
        .collect::<Vec<_>>()
        .join(", ")
}
