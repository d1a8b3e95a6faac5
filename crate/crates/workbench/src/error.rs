use std::fmt;
use std::path::{Path, PathBuf};

use rft_inverse::RftError;
use thiserror::Error;

/// Pipeline stage that raised an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Geometry,
    GroundTruth,
    Forward,
    Dataset,
    Fit,
    Posterior,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Geometry => "geometry",
            Stage::GroundTruth => "ground_truth",
            Stage::Forward => "forward",
            Stage::Dataset => "dataset",
            Stage::Fit => "fit",
            Stage::Posterior => "posterior",
            Stage::Metrics => "metrics",
        })
    }
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage { stage: Stage, source: RftError },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, WorkbenchError>;

impl WorkbenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        WorkbenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Config(_) => 2,
            WorkbenchError::Io { .. } => 4,
            WorkbenchError::Stage { source, .. } => match source {
                RftError::InvalidSpec(_) | RftError::DimensionMismatch(_) => 2,
                RftError::Parse(_) => 4,
                RftError::Workspace { .. }
                | RftError::SingularJacobian { .. }
                | RftError::NotPositiveDefinite { .. }
                | RftError::DegenerateFit(_)
                | RftError::NonFinite(_)
                | RftError::Empty(_) => 3,
            },
        }
    }
}

/// Attaches a stage to a core error.
pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> AtStage<T> for std::result::Result<T, RftError> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|source| WorkbenchError::Stage { stage, source })
    }
}
