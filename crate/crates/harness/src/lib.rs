//! Batch runner for the lattice experiments: configuration, the studies
//! behind each figure, and the artifact writer with its manifest.

pub mod config;
pub mod experiments;
pub mod output;
pub mod validate;

pub use config::{Experiment, ExperimentConfig, GammaConvention, InitialKind};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: dnls_core::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn numerical(context: impl Into<String>) -> impl FnOnce(dnls_core::Error) -> Self {
        let context = context.into();
        move |source| HarnessError::Numerical { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => exit::CONFIG,
            HarnessError::Numerical { .. } => exit::NUMERICAL,
        }
    }
}

pub mod exit {
    pub const PASS: i32 = 0;
    pub const EXPECTATION: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}
