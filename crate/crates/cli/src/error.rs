//! CLI errors, exit codes and the machine-readable failure reason.

use std::path::PathBuf;

use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SYNC: i32 = 4;
pub const EXIT_UNUSABLE: i32 = 5;
pub const EXIT_ESTIMATION: i32 = 6;
pub const EXIT_DESIGN: i32 = 7;
pub const EXIT_PIPELINE: i32 = 8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config field {field}: {message}")]
    Config { field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: occlink::Error,
    },
}

/// Failure description written to report.json.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reason {
    pub kind: &'static str,
    pub stage: Option<&'static str>,
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use occlink::Error as E;
        match self {
            Self::Config { .. } => EXIT_CONFIG,
            Self::Io { .. } => EXIT_IO,
            Self::Stage { source, .. } => match source {
                E::SyncFailure { .. } => EXIT_SYNC,
                E::UnusableCapture(_) => EXIT_UNUSABLE,
                E::EstimationSingular(_) => EXIT_ESTIMATION,
                E::DesignSingular(_) => EXIT_DESIGN,
                E::Config(_) => EXIT_CONFIG,
                E::Io(_) | E::Pgm(_) => EXIT_IO,
                _ => EXIT_PIPELINE,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use occlink::Error as E;
        match self {
            Self::Config { .. } => "config",
            Self::Io { .. } => "io",
            Self::Stage { source, .. } => match source {
                E::SyncFailure { .. } => "sync_failure",
                E::UnusableCapture(_) => "unusable_capture",
                E::EstimationSingular(_) => "estimation_singular",
                E::DesignSingular(_) => "design_singular",
                E::Config(_) => "config",
                E::Io(_) => "io",
                E::Pgm(_) => "bad_image",
                E::Shape(_) => "shape",
                E::Domain(_) => "domain",
                E::SingularSystem(_) => "singular_system",
            },
        }
    }

    pub fn reason(&self) -> Reason {
        let (stage, field, message) = match self {
            Self::Config { field, message } => (None, Some(field.clone()), message.clone()),
            Self::Io { .. } => (None, None, self.to_string()),
            Self::Stage { stage, source } => (Some(*stage), None, source.to_string()),
        };
        Reason {
            kind: self.kind(),
            stage,
            field,
            message,
        }
    }
}

/// Tag a library error with the pipeline stage that raised it.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for occlink::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
