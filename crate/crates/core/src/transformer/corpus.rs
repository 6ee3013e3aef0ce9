use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A token sequence with a binary class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub tokens: Vec<u32>,
    pub label: u8,
    /// Sequences sharing a group are kept on the same side of a split.
    pub group: Option<usize>,
}

impl LabeledSequence {
    pub fn new(tokens: Vec<u32>, label: u8) -> Self {
        LabeledSequence { tokens, label, group: None }
    }
}

/// Whether `token` belongs to dialect 1 (the upper half of the vocabulary).
pub fn is_class_one(token: u32, vocab_size: usize) -> bool {
    token as usize >= vocab_size / 2
}

/// Fraction of dialect-1 tokens; 0 for an empty slice.
pub fn dialect_fraction(tokens: &[u32], vocab_size: usize) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    tokens.iter().filter(|&&t| is_class_one(t, vocab_size)).count() as f64 / tokens.len() as f64
}

fn sequence(rng: &mut ChaCha8Rng, vocab_size: usize, len: usize, p_high: f64) -> Vec<u32> {
    let half = (vocab_size / 2) as u32;
    (0..len)
        .map(|_| {
            let low = rng.random_range(0..half);
            if rng.random_bool(p_high) { low + half } else { low }
        })
        .collect()
}

/// Two-dialect minimal-pair corpus of `per_class` pairs.
///
/// Each pair shares one message: a label-1 sequence drawing each token from
/// dialect 1 with probability 0.8, and its label-0 twin with every token
/// moved to the other half of the vocabulary. Twins are adjacent (label 0
/// first) and share a group id. Lengths are uniform in `min_len..=max_len`.
pub fn dialect_corpus(
    vocab_size: usize,
    per_class: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<LabeledSequence>> {
    if per_class == 0 || min_len == 0 || min_len > max_len || vocab_size < 2 || vocab_size % 2 != 0 {
        return Err(Error::InvalidArgument(
            "corpus needs an even vocabulary, per_class >= 1 and 1 <= min_len <= max_len".into(),
        ));
    }
    let half = (vocab_size / 2) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for group in 0..per_class {
        let len = rng.random_range(min_len..=max_len);
        let one = sequence(&mut rng, vocab_size, len, 0.8);
        let zero = one.iter().map(|&t| (t + half) % (2 * half)).collect();
        out.push(LabeledSequence { tokens: zero, label: 0, group: Some(group) });
        out.push(LabeledSequence { tokens: one, label: 1, group: Some(group) });
    }
    Ok(out)
}

/// Parameters of [`dialect_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { per_class: 128, min_len: 16, max_len: 48, seed: 42 }
    }
}

impl CorpusSpec {
    pub fn generate(&self, vocab_size: usize) -> Result<Vec<LabeledSequence>> {
        dialect_corpus(vocab_size, self.per_class, self.min_len, self.max_len, self.seed)
    }
}

/// Unlabeled prompts whose dialect-1 probability is spread evenly over
/// `[0.3, 0.7]`, for steering sweeps.
pub fn mixed_prompts(vocab_size: usize, n: usize, len: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p = if n == 1 { 0.5 } else { 0.3 + 0.4 * i as f64 / (n - 1) as f64 };
            sequence(&mut rng, vocab_size, len, p)
        })
        .collect()
}
