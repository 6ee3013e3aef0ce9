use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoding parameters forwarded to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: Option<f64>,
    pub max_tokens: usize,
    pub sampling_enabled: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamsPreset {
    /// Survey runs that measure a model's stance.
    Identification,
    /// Greedy, short generations used while steering.
    Intervention,
}

impl ParamsPreset {
    pub fn params(self) -> GenerationParams {
        match self {
            ParamsPreset::Identification => GenerationParams {
                temperature: 0.7,
                top_p: Some(0.9),
                max_tokens: 256,
                sampling_enabled: true,
                seed: 42,
            },
            ParamsPreset::Intervention => GenerationParams {
                temperature: 0.0,
                top_p: None,
                max_tokens: 100,
                sampling_enabled: false,
                seed: 42,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamsPreset::Identification => "identification",
            ParamsPreset::Intervention => "intervention",
        }
    }
}

impl FromStr for ParamsPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identification" => Ok(ParamsPreset::Identification),
            "intervention" => Ok(ParamsPreset::Intervention),
            other => Err(Error::InvalidArgument(format!("unknown params preset `{other}`"))),
        }
    }
}

impl fmt::Display for ParamsPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("generation params: {m}")));
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be finite and non-negative");
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return bad("top_p must lie in (0, 1]");
            }
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        if self.sampling_enabled && self.temperature == 0.0 {
            return bad("sampling requires a positive temperature");
        }
        Ok(())
    }

    /// Stable identifier: the preset name, or a content hash for custom values.
    pub fn id(&self) -> String {
        for preset in [ParamsPreset::Identification, ParamsPreset::Intervention] {
            if *self == preset.params() {
                return preset.name().to_string();
            }
        }
        let canonical = serde_json::to_string(self).expect("params serialize");
        format!("custom-{}", &crate::util::sha256_hex(canonical.as_bytes())[..12])
    }
}
