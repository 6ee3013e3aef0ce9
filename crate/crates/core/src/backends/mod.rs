//! A uniform text-generation interface over a remote chat-completion
//! service, the bundled toy transformer and a scripted mock.

mod params;
mod remote;
mod scripted;
mod survey;
mod toy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use params::{GenerationParams, ParamsPreset};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV};
pub use scripted::{ScriptConfig, ScriptFallback, ScriptRule, ScriptedBackend};
pub use survey::{run_survey, run_survey_with, SurveyOptions, SurveyTask};
pub use toy::{Readout, ToyBackend, ToyBackendConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    RemoteHttp,
    ToyModel,
    Scripted,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::RemoteHttp => "remote-http",
            BackendKind::ToyModel => "toy-model",
            BackendKind::Scripted => "scripted",
        }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn kind(&self) -> BackendKind;

    /// Completion text for `prompt`, never including the prompt itself.
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String>;

    /// `Some(true)` if the seed is forwarded, `Some(false)` if it is recorded only.
    fn seed_sent(&self) -> Option<bool> {
        None
    }

    /// Upper bound on concurrent `generate` calls issued by a survey.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// Backend selection as written in an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    #[serde(flatten)]
    pub spec: BackendSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    RemoteHttp(RemoteConfig),
    ToyModel(ToyBackendConfig),
    Scripted(ScriptConfig),
}

impl BackendDescriptor {
    pub fn kind(&self) -> BackendKind {
        match self.spec {
            BackendSpec::RemoteHttp(_) => BackendKind::RemoteHttp,
            BackendSpec::ToyModel(_) => BackendKind::ToyModel,
            BackendSpec::Scripted(_) => BackendKind::Scripted,
        }
    }

    /// Instantiates the backend; relative paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &std::path::Path) -> Result<Arc<dyn Backend>> {
        if self.id.trim().is_empty() || self.id.contains(['/', '\\']) || self.id.contains("__") {
            return Err(Error::InvalidArgument(format!(
                "backend id `{}` must be non-empty and free of path separators and `__`",
                self.id
            )));
        }
        Ok(match &self.spec {
            BackendSpec::RemoteHttp(cfg) => Arc::new(RemoteBackend::new(&self.id, cfg.clone())?),
            BackendSpec::ToyModel(cfg) => Arc::new(ToyBackend::from_config(&self.id, cfg, base_dir)?),
            BackendSpec::Scripted(cfg) => Arc::new(ScriptedBackend::new(&self.id, cfg.clone())),
        })
    }
}
