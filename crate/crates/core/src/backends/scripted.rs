use serde::{Deserialize, Serialize};

use super::{Backend, BackendKind, GenerationParams};
use crate::error::{Error, Result};
use crate::util::fnv1a64;

/// Reply `reply` whenever the prompt contains `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptFallback {
    Fixed(String),
    /// `"<i>."` with `i` in 1..=4 drawn from a hash of prompt and seed.
    Hashed,
}

impl Default for ScriptFallback {
    fn default() -> Self {
        ScriptFallback::Fixed("3. Agree".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptConfig {
    /// Checked in order; the first match wins.
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    /// Prompts containing any of these substrings fail to generate.
    #[serde(default)]
    pub fail_on: Vec<String>,
    #[serde(default)]
    pub fallback: ScriptFallback,
}

impl ScriptConfig {
    pub fn fixed(reply: impl Into<String>) -> Self {
        ScriptConfig { fallback: ScriptFallback::Fixed(reply.into()), ..Default::default() }
    }
}

/// Deterministic mock backend driven by a [`ScriptConfig`].
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    id: String,
    script: ScriptConfig,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>, script: ScriptConfig) -> Self {
        ScriptedBackend { id: id.into(), script }
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        if let Some(trigger) = self.script.fail_on.iter().find(|t| prompt.contains(t.as_str())) {
            return Err(Error::Scripted(format!("prompt contains `{trigger}`")));
        }
        if let Some(rule) = self.script.rules.iter().find(|r| prompt.contains(r.contains.as_str())) {
            return Ok(rule.reply.clone());
        }
        Ok(match &self.script.fallback {
            ScriptFallback::Fixed(reply) => reply.clone(),
            ScriptFallback::Hashed => {
                let mut bytes = prompt.as_bytes().to_vec();
                bytes.extend_from_slice(&params.seed.to_le_bytes());
                format!("{}.", fnv1a64(&bytes) % 4 + 1)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ParamsPreset;

    #[test]
    fn rules_failures_and_fallbacks() {
        let p = ParamsPreset::Intervention.params();
        let b = ScriptedBackend::new(
            "s",
            ScriptConfig {
                rules: vec![ScriptRule { contains: "tax".into(), reply: "1. Strongly disagree".into() }],
                fail_on: vec!["boom".into()],
                fallback: ScriptFallback::Fixed("3. Agree".into()),
            },
        );
        assert_eq!(b.generate("any prompt", &p).unwrap(), "3. Agree");
        assert_eq!(b.generate("about tax", &p).unwrap(), "1. Strongly disagree");
        assert!(matches!(b.generate("boom tax", &p), Err(Error::Scripted(_))));
        let h = ScriptedBackend::new("h", ScriptConfig { fallback: ScriptFallback::Hashed, ..Default::default() });
        let a = h.generate("x", &p).unwrap();
        assert_eq!(a, h.generate("x", &p).unwrap());
        assert!(["1.", "2.", "3.", "4."].contains(&a.as_str()));
    }
}
