//! Configuration, run kinds, manifests and plot data for `mlt-tool`.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

use std::path::{Path, PathBuf};

use levy_ml::fp_solver::SolverError;
use levy_ml::mlt::MltError;
use levy_ml::model::ModelError;
use thiserror::Error;

pub use config::{parse_config, parse_str, ConfigError, RunConfig, RunKind};
pub use output::{RunManifest, RunWriter, MANIFEST_NAME};
pub use plot::emit_plotdata;
pub use run::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("no plot layout for artifact {0}")]
    UnknownArtifact(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Mlt(#[from] MltError),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
