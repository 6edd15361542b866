use std::path::PathBuf;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The config file could not be read as a config.
    #[error("config: {0}")]
    Config(String),

    /// A config or flag value violates its rule.
    #[error("invalid `{field}`: {rule}")]
    Invalid { field: String, rule: String },

    /// An engine stage failed.
    #[error("{stage}: {source}")]
    Engine {
        stage: &'static str,
        #[source]
        source: ntci_core::Error,
    },

    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {detail}")]
    Output { stage: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CHECKER: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Stage name used for config-to-engine translation.
pub const VALIDATE: &str = "validate";

impl CliError {
    pub fn invalid(field: impl Into<String>, rule: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            rule: rule.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use ntci_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Invalid { .. } => EXIT_VALIDATION,
            CliError::Io { stage: "config", .. } => EXIT_VALIDATION,
            CliError::Engine { source: E::Assumption { .. }, .. } => EXIT_CHECKER,
            CliError::Engine {
                source: E::InvalidParameter { .. } | E::SizeCap { .. },
                ..
            } => EXIT_VALIDATION,
            CliError::Engine { stage, .. } if *stage == VALIDATE => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Attach a stage name to engine results.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for ntci_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Engine { stage, source })
    }
}
