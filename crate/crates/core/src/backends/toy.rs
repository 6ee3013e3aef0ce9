use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendKind, GenerationParams};
use crate::error::{Error, Result};
use crate::steering::InterventionPlan;
use crate::transformer::{dialect_fraction, Model, ModelConfig, PlantedSpec, Sampler};
use crate::util::fnv1a64;

/// How generated bytes become completion text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Lossy UTF-8 decoding of the generated bytes.
    #[default]
    Raw,
    /// `"<i>."` where `i` is 1..=4 by the quarter the dialect-1 fraction falls in.
    Dialect,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyBackendConfig {
    /// Saved model; takes precedence over `model`/`planted`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub planted: Option<PlantedSpec>,
    #[serde(default)]
    pub plan: Option<PathBuf>,
    #[serde(default)]
    pub readout: Readout,
    #[serde(default)]
    pub intervene_on_prompt: bool,
    /// Cap on generated tokens; the context window is small.
    #[serde(default)]
    pub max_new_tokens: Option<usize>,
}

/// Default generation cap of the toy backend.
pub const DEFAULT_TOY_MAX_NEW_TOKENS: usize = 32;

/// The bundled transformer as a text backend over UTF-8 bytes.
#[derive(Debug)]
pub struct ToyBackend {
    id: String,
    model: Arc<Model>,
    plans: Vec<InterventionPlan>,
    readout: Readout,
    intervene_on_prompt: bool,
    max_new_tokens: usize,
}

impl ToyBackend {
    pub fn new(id: impl Into<String>, model: Arc<Model>, plans: Vec<InterventionPlan>, readout: Readout) -> Result<Self> {
        if model.config().vocab_size != 256 {
            return Err(Error::InvalidArgument("text backends need the 256-entry byte vocabulary".into()));
        }
        Ok(ToyBackend {
            id: id.into(),
            model,
            plans,
            readout,
            intervene_on_prompt: false,
            max_new_tokens: DEFAULT_TOY_MAX_NEW_TOKENS,
        })
    }

    pub fn with_intervene_on_prompt(mut self, on: bool) -> Self {
        self.intervene_on_prompt = on;
        self
    }

    pub fn with_max_new_tokens(mut self, n: usize) -> Self {
        self.max_new_tokens = n;
        self
    }

    pub fn from_config(id: &str, cfg: &ToyBackendConfig, base_dir: &Path) -> Result<Self> {
        let model = match (&cfg.checkpoint, cfg.planted) {
            (Some(path), _) => Model::load(&base_dir.join(path))?,
            (None, Some(spec)) => Model::planted(cfg.model.unwrap_or_default(), spec)?,
            (None, None) => Model::random(cfg.model.unwrap_or_default())?,
        };
        let plans = match &cfg.plan {
            Some(path) => vec![InterventionPlan::load(&base_dir.join(path))?],
            None => Vec::new(),
        };
        Ok(ToyBackend::new(id, Arc::new(model), plans, cfg.readout)?
            .with_intervene_on_prompt(cfg.intervene_on_prompt)
            .with_max_new_tokens(cfg.max_new_tokens.unwrap_or(DEFAULT_TOY_MAX_NEW_TOKENS)))
    }

    pub fn model(&self) -> &Model {
        &self.model
    }
}

impl Backend for ToyBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ToyModel
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        params.validate()?;
        let tokens: Vec<u32> = prompt.bytes().map(u32::from).collect();
        let sampler = if params.sampling_enabled {
            Sampler::Sample {
                temperature: params.temperature,
                top_p: params.top_p,
                seed: params.seed ^ fnv1a64(prompt.as_bytes()),
            }
        } else {
            Sampler::Greedy
        };
        let n = params.max_tokens.min(self.max_new_tokens);
        let trace = self.model.generate_traced(&tokens, n, &self.plans, self.intervene_on_prompt, sampler)?;
        Ok(match self.readout {
            Readout::Raw => {
                let bytes: Vec<u8> = trace.generated.iter().map(|&t| t as u8).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            Readout::Dialect => {
                let f = dialect_fraction(&trace.generated, self.model.config().vocab_size);
                format!("{}.", ((f * 4.0).floor() as u8).min(3) + 1)
            }
        })
    }

    fn seed_sent(&self) -> Option<bool> {
        Some(true)
    }

    /// Generation is pure, so calls only compete for cores.
    fn max_in_flight(&self) -> usize {
        std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
    }
}
