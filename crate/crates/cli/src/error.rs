use std::path::PathBuf;

/// Exit status of a run whose criteria all passed.
pub const EXIT_PASS: i32 = 0;
/// At least one verdict failed.
pub const EXIT_CRITERION_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A library error, tagged with the pipeline stage that raised it.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: equilab_core::Error,
    },

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io { .. } => EXIT_CONFIG,
            LabError::Stage { source, .. } => {
                if source.is_configuration() || matches!(source, equilab_core::Error::InvalidField(_)) {
                    EXIT_CONFIG
                } else {
                    EXIT_NUMERIC
                }
            }
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

/// Attaches a stage name to library errors.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> LabResult<T>;
}

impl<T> StageExt<T> for equilab_core::Result<T> {
    fn stage(self, stage: &str) -> LabResult<T> {
        self.map_err(|source| LabError::Stage { stage: stage.to_string(), source })
    }
}
