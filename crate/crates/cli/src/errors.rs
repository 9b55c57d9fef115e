//! Error-to-exit-code mapping for the CLI.

use std::fmt;

#[derive(Debug)]
pub enum AppError {
    /// Missing input file or other I/O failure (exit 3).
    Io(String),
    /// Schema, parse, or config violation (exit 4).
    Schema(String),
    /// External service failure (exit 5).
    Service(String),
    /// Anything else (exit 1).
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io(_) => 3,
            AppError::Schema(_) => 4,
            AppError::Service(_) => 5,
            AppError::Other(_) => 1,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Io(m) | AppError::Schema(m) | AppError::Service(m) | AppError::Other(m) => {
                write!(f, "{m}")
            }
        }
    }
}

impl From<vigil_core::store::StoreError> for AppError {
    fn from(e: vigil_core::store::StoreError) -> Self {
        match e {
            vigil_core::store::StoreError::Io { .. } => AppError::Io(e.to_string()),
            vigil_core::store::StoreError::Schema { .. } => AppError::Schema(e.to_string()),
        }
    }
}

impl From<vigil_core::store::ConfigError> for AppError {
    fn from(e: vigil_core::store::ConfigError) -> Self {
        match e {
            vigil_core::store::ConfigError::Io { .. } => AppError::Io(e.to_string()),
            _ => AppError::Schema(e.to_string()),
        }
    }
}

impl From<vigil_engine::EngineError> for AppError {
    fn from(e: vigil_engine::EngineError) -> Self {
        match e {
            vigil_engine::EngineError::Client(_) => AppError::Service(e.to_string()),
            vigil_engine::EngineError::Gate(_) => AppError::Schema(e.to_string()),
            vigil_engine::EngineError::Input(_) => AppError::Schema(e.to_string()),
        }
    }
}

impl From<vigil_clients::ClientError> for AppError {
    fn from(e: vigil_clients::ClientError) -> Self {
        AppError::Service(e.to_string())
    }
}

impl From<vigil_core::metrics::MetricError> for AppError {
    fn from(e: vigil_core::metrics::MetricError) -> Self {
        AppError::Schema(e.to_string())
    }
}

impl From<vigil_core::loss::LossError> for AppError {
    fn from(e: vigil_core::loss::LossError) -> Self {
        AppError::Schema(e.to_string())
    }
}

impl From<vigil_core::curriculum::CurriculumError> for AppError {
    fn from(e: vigil_core::curriculum::CurriculumError) -> Self {
        AppError::Schema(e.to_string())
    }
}

impl From<vigil_core::scene_gate::GateError> for AppError {
    fn from(e: vigil_core::scene_gate::GateError) -> Self {
        AppError::Schema(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Schema(e.to_string())
    }
}
