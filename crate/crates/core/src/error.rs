use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplanError {
    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),

    #[error("no path from ({:.2}, {:.2}) to ({:.2}, {:.2})", .start.0, .start.1, .goal.0, .goal.1)]
    NoPath { start: (f64, f64), goal: (f64, f64) },

    #[error("initial plan failed for seed {seed}")]
    InitialPlanFailed { seed: u64 },

    #[error("step called on a finished episode")]
    StepAfterDone,

    #[error("replay buffer holds {len} transitions, need at least {required}")]
    BufferUnderfull { len: usize, required: usize },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("trace mismatch at line {line}: {detail}")]
    TraceMismatch { line: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ReplanError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReplanError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ReplanError> = std::result::Result<T, E>;
