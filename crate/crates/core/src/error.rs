use std::path::PathBuf;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A configuration value is missing, malformed or inconsistent.
    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown configuration key `{key}`")]
    UnknownKey { key: String },

    #[error("cannot read configuration file {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed configuration: {0}")]
    ConfigSyntax(String),

    #[error("half-duplex violation in subframe {subframe}: UE {ue} is on the WAN uplink and an access link")]
    HalfDuplexViolation { subframe: u64, ue: usize },

    #[error("statistics requested over an empty sample set")]
    EmptySamples,

    #[error("cannot merge metrics of different scenarios ({left} vs {right})")]
    ScenarioMismatch { left: String, right: String },
}

impl SimError {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
