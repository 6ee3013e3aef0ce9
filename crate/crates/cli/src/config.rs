//! The per-experiment TOML config.
//!
//! ```toml
//! [experiment]
//! name = "demo"
//! languages = ["en", "de"]
//! params = "identification"        # or an inline GenerationParams table
//!
//! [[backend]]
//! id = "mock"
//! kind = "scripted"
//! fallback = { fixed = "3. Agree" }
//!
//! [steer]
//! k = 1
//! alpha = 5.0
//! sweep = { alpha = [0, 5, 10, 20], sign = [1, -1] }
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use compass_core::backends::{BackendDescriptor, GenerationParams, ParamsPreset};
use compass_core::harness::{LabelTable, TemplateSet};
use compass_core::questionnaire::Questionnaire;
use compass_core::steering::{ProbeConfig, Sign};
use compass_core::transformer::{CorpusSpec, ModelConfig, PlantedSpec};
use compass_core::util::sha256_hex;

use crate::error::{read, CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default, rename = "backend")]
    pub backends: Vec<BackendDescriptor>,
    #[serde(default)]
    pub steer: Option<SteerConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    /// Defaults to the bundled instrument.
    #[serde(default)]
    pub questionnaire: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub languages: Vec<String>,
    #[serde(default)]
    pub params: ParamsChoice,
    /// Use only the first `n` paraphrases.
    #[serde(default)]
    pub paraphrases: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsChoice {
    Preset(ParamsPreset),
    Custom(GenerationParams),
}

impl Default for ParamsChoice {
    fn default() -> Self {
        ParamsChoice::Preset(ParamsPreset::Identification)
    }
}

impl ParamsChoice {
    pub fn params(&self) -> GenerationParams {
        match self {
            ParamsChoice::Preset(p) => p.params(),
            ParamsChoice::Custom(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerConfig {
    /// Saved model; otherwise built from `model` and `planted`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub planted: Option<PlantedSpec>,
    #[serde(default)]
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "positive")]
    pub sign: Sign,
    #[serde(default)]
    pub intervene_on_prompt: bool,
    #[serde(default)]
    pub max_new_tokens: Option<usize>,
    /// Eval decoding; defaults to the greedy intervention preset.
    #[serde(default)]
    pub params: Option<ParamsChoice>,
    /// Eval languages; defaults to the experiment's.
    #[serde(default)]
    pub languages: Option<Vec<String>>,
    #[serde(default)]
    pub sweep: SweepGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    /// Empty means the plan's own K.
    pub k: Vec<usize>,
    pub alpha: Vec<f64>,
    pub sign: Vec<Sign>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { k: Vec::new(), alpha: vec![0.0, 5.0, 10.0, 20.0], sign: vec![Sign::Positive, Sign::Negative] }
    }
}

fn one() -> usize {
    1
}

fn default_alpha() -> f64 {
    5.0
}

fn positive() -> Sign {
    Sign::Positive
}

/// A parsed config with its instrument inputs resolved.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub path: PathBuf,
    pub base_dir: PathBuf,
    /// Hex SHA-256 of the config file bytes.
    pub sha256: String,
    pub config: Config,
    pub questionnaire: Questionnaire,
    pub templates: TemplateSet,
    pub labels: LabelTable,
    pub params: GenerationParams,
}

impl Loaded {
    pub fn steer(&self) -> Result<&SteerConfig> {
        self.config.steer.as_ref().ok_or_else(|| self.invalid("missing [steer] section".into()))
    }

    pub fn invalid(&self, message: String) -> CliError {
        CliError::Config { path: self.path.clone(), message }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}

pub fn load(path: &Path) -> Result<Loaded> {
    let bytes = read(path)?;
    let invalid = |message: String| CliError::Config { path: path.to_path_buf(), message };
    let text = std::str::from_utf8(&bytes).map_err(|e| invalid(e.to_string()))?;
    let config: Config = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let exp = &config.experiment;
    if exp.languages.is_empty() {
        return Err(invalid("experiment.languages is empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for lang in &exp.languages {
        if !seen.insert(lang) {
            return Err(invalid(format!("language `{lang}` listed twice")));
        }
    }
    let mut ids = std::collections::BTreeSet::new();
    for b in &config.backends {
        if !ids.insert(&b.id) {
            return Err(invalid(format!("backend id `{}` listed twice", b.id)));
        }
    }
    let questionnaire = match &exp.questionnaire {
        Some(p) => Questionnaire::from_path(&base_dir.join(p))?,
        None => Questionnaire::canonical()?,
    };
    let mut templates = match &exp.templates {
        Some(p) => TemplateSet::from_path(&base_dir.join(p))?,
        None => TemplateSet::canonical()?,
    };
    if let Some(n) = exp.paraphrases {
        templates = templates.truncated(n)?;
    }
    let labels = match &exp.labels {
        Some(p) => LabelTable::from_path(&base_dir.join(p))?,
        None => LabelTable::canonical().clone(),
    };
    let params = exp.params.params();
    params.validate()?;
    Ok(Loaded {
        path: path.to_path_buf(),
        base_dir,
        sha256: sha256_hex(&bytes),
        config,
        questionnaire,
        templates,
        labels,
        params,
    })
}
