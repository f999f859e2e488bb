//! Experiment drivers behind the `trustsmg` binary.

pub mod experiments;

use thiserror::Error;
use trustsmg::engine::EngineError;
use trustsmg::rpatl::ParseError;
use trustsmg::smg::SmgError;
use trustsmg::trust::TrustError;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("property: {0}")]
    Property(#[from] ParseError),
    #[error("model: {0}")]
    Model(#[from] SmgError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl Failure {
    /// 2 for bad input, 3 when solving itself fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Engine(EngineError::NotConverged { .. }) => 3,
            Failure::Trust(TrustError::StateExplosion { .. }) => 3,
            _ => 2,
        }
    }
}

pub fn read_file(path: &std::path::Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|source| Failure::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &std::path::Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|source| Failure::Io {
        path: path.display().to_string(),
        source,
    })
}
