//! A small deterministic decoder-only transformer with per-head activation
//! capture and head-output interventions.
//!
//! Blocks are pre-LayerNorm (no learnable gain or bias), positions are fixed
//! sinusoids, the vocabulary is byte-level and all arithmetic is `f64`.
//! Weights are seeded random, optionally with a planted two-dialect head
//! (see [`PlantedSpec`]); there is no training loop.

mod activations;
mod corpus;
mod forward;
mod model;
mod tensors;

use serde::{Deserialize, Serialize};

pub use activations::{collect_head_activations, ActivationDataset};
pub use corpus::{dialect_corpus, CorpusSpec, dialect_fraction, is_class_one, mixed_prompts, LabeledSequence};
pub use forward::{ForwardOptions, ForwardOutput, GenerationTrace, Sampler};
pub use model::{Model, PlantedSpec};
pub use tensors::{read_tensors, write_tensors, Tensor, TensorFile};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub head_dim: usize,
    pub vocab_size: usize,
    pub context_len: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { n_layers: 4, n_heads: 4, head_dim: 16, vocab_size: 256, context_len: 128, init_seed: 42 }
    }
}

impl ModelConfig {
    pub fn d_model(&self) -> usize {
        self.n_heads * self.head_dim
    }

    pub fn total_heads(&self) -> usize {
        self.n_layers * self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.n_layers, self.n_heads, self.head_dim, self.vocab_size, self.context_len];
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("model dimensions must all be positive".into()));
        }
        Ok(())
    }

    pub fn check_head(&self, head: HeadId) -> Result<()> {
        if head.layer >= self.n_layers || head.head >= self.n_heads {
            return Err(Error::InvalidArgument(format!(
                "head {head} outside {} layers x {} heads",
                self.n_layers, self.n_heads
            )));
        }
        Ok(())
    }

    /// All heads in (layer, head) order.
    pub fn heads(&self) -> impl Iterator<Item = HeadId> + '_ {
        (0..self.n_layers).flat_map(move |layer| (0..self.n_heads).map(move |head| HeadId { layer, head }))
    }

    fn head_index(&self, h: HeadId) -> usize {
        h.layer * self.n_heads + h.head
    }
}

/// An attention head addressed by layer and index within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub fn new(layer: usize, head: usize) -> Self {
        HeadId { layer, head }
    }
}

impl std::fmt::Display for HeadId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.layer, self.head)
    }
}

/// Per-head output vectors at one token position.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadActivations {
    n_heads: usize,
    head_dim: usize,
    data: Vec<f64>,
}

impl HeadActivations {
    fn zeros(config: &ModelConfig) -> Self {
        HeadActivations {
            n_heads: config.n_heads,
            head_dim: config.head_dim,
            data: vec![0.0; config.total_heads() * config.head_dim],
        }
    }

    pub fn head(&self, h: HeadId) -> &[f64] {
        let start = (h.layer * self.n_heads + h.head) * self.head_dim;
        &self.data[start..start + self.head_dim]
    }

    /// Concatenation of all heads in (layer, head) order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}
