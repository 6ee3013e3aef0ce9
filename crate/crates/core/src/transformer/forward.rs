use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HeadActivations, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::steering::InterventionPlan;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Record attention weight rows for every layer, head and position.
    pub capture_attention: bool,
    /// Record head outputs at every position instead of only the last.
    pub capture_all_positions: bool,
    /// Plans apply at positions `>= intervene_from`.
    pub intervene_from: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Next-token logits at each position.
    pub logits: Vec<Vec<f64>>,
    /// Head outputs before any plan offset, per captured position.
    pub head_outputs: Vec<HeadActivations>,
    /// Head outputs as passed to the output projection.
    pub steered_outputs: Vec<HeadActivations>,
    /// `attention[layer][head][i]` holds the weights of position `i` over `0..=i`.
    pub attention: Option<Vec<Vec<Vec<Vec<f64>>>>>,
}

impl ForwardOutput {
    /// Unmodified head outputs at the final position.
    pub fn last_head_outputs(&self) -> &HeadActivations {
        self.head_outputs.last().expect("forward never runs on empty input")
    }
}

/// Decoding step record: head outputs used to produce one generated token.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    /// Prompt tokens actually fed after left-truncation.
    pub prompt: Vec<u32>,
    pub generated: Vec<u32>,
    /// `pre[k]`: head outputs before plan offsets at decode step `k`.
    pub pre: Vec<HeadActivations>,
    /// `post[k]`: head outputs after plan offsets at decode step `k`.
    pub post: Vec<HeadActivations>,
}

/// Decoding rule for [`Model::generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Greedy,
    /// Temperature and nucleus sampling from a ChaCha stream seeded by `seed`.
    Sample { temperature: f64, top_p: Option<f64>, seed: u64 },
}

struct KvCache {
    /// per layer: flattened `[pos][d]`
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl KvCache {
    fn new(config: &ModelConfig) -> Self {
        KvCache { keys: vec![Vec::new(); config.n_layers], values: vec![Vec::new(); config.n_layers] }
    }
}

/// Summed plan offsets per head, with the set of touched heads.
struct Offsets {
    touched: Vec<bool>,
    delta: Vec<f64>,
}

impl Offsets {
    fn build(config: &ModelConfig, plans: &[InterventionPlan]) -> Result<Option<Self>> {
        if plans.is_empty() {
            return Ok(None);
        }
        let hd = config.head_dim;
        let mut touched = vec![false; config.total_heads()];
        let mut delta = vec![0.0; config.total_heads() * hd];
        for plan in plans {
            for (head, offset) in plan.offsets() {
                config.check_head(head)?;
                if offset.len() != hd {
                    return Err(Error::MalformedPlan(format!(
                        "direction for head {head} has {} entries, head_dim is {hd}",
                        offset.len()
                    )));
                }
                let idx = config.head_index(head);
                touched[idx] = true;
                for (dst, o) in delta[idx * hd..(idx + 1) * hd].iter_mut().zip(&offset) {
                    *dst += o;
                }
            }
        }
        Ok(Some(Offsets { touched, delta }))
    }
}

fn layer_norm(x: &[f64], out: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - mean) * inv;
    }
}

/// `out = x · W` for row-major `W` of shape `x.len() x out.len()`.
fn matvec(x: &[f64], w: &[f64], out: &mut [f64]) {
    let cols = out.len();
    out.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (0.797_884_560_802_865_4 * (x + 0.044_715 * x * x * x)).tanh())
}

struct StepOut {
    logits: Vec<f64>,
    pre: HeadActivations,
    post: HeadActivations,
    attention: Option<Vec<Vec<f64>>>,
}

impl Model {
    fn step(
        &self,
        token: u32,
        pos: usize,
        cache: &mut KvCache,
        offsets: Option<&Offsets>,
        capture_attention: bool,
    ) -> StepOut {
        let c = &self.config;
        let d = c.d_model();
        let hd = c.head_dim;
        let t = token as usize;
        let mut x: Vec<f64> = self.embed[t * d..(t + 1) * d].to_vec();
        let mut pe = vec![0.0; d];
        self.positional(pos, &mut pe);
        for (xi, p) in x.iter_mut().zip(&pe) {
            *xi += p;
        }

        let mut pre = HeadActivations::zeros(c);
        let mut post = HeadActivations::zeros(c);
        let mut attention = capture_attention.then(Vec::new);
        let mut ln = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut k = vec![0.0; d];
        let mut v = vec![0.0; d];
        let mut heads = vec![0.0; d];
        let mut proj = vec![0.0; d];
        let mut hidden = vec![0.0; 4 * d];
        let scale = 1.0 / (hd as f64).sqrt();

        for (l, layer) in self.layers.iter().enumerate() {
            layer_norm(&x, &mut ln);
            matvec(&ln, &layer.wq, &mut q);
            matvec(&ln, &layer.wk, &mut k);
            matvec(&ln, &layer.wv, &mut v);
            cache.keys[l].extend_from_slice(&k);
            cache.values[l].extend_from_slice(&v);
            let n = pos + 1;
            let keys = &cache.keys[l];
            let values = &cache.values[l];
            for h in 0..c.n_heads {
                let cols = h * hd..(h + 1) * hd;
                let qh = &q[cols.clone()];
                let mut weights: Vec<f64> = (0..n)
                    .map(|j| {
                        let kj = &keys[j * d + h * hd..j * d + (h + 1) * hd];
                        qh.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale
                    })
                    .collect();
                let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for w in &mut weights {
                    *w = (*w - max).exp();
                    total += *w;
                }
                for w in &mut weights {
                    *w /= total;
                }
                let out = &mut heads[cols.clone()];
                out.fill(0.0);
                for (j, &a) in weights.iter().enumerate() {
                    let vj = &values[j * d + h * hd..j * d + (h + 1) * hd];
                    for (o, vv) in out.iter_mut().zip(vj) {
                        *o += a * vv;
                    }
                }
                let idx = l * c.n_heads + h;
                pre.data[idx * hd..(idx + 1) * hd].copy_from_slice(out);
                if let Some(off) = offsets.filter(|o| o.touched[idx]) {
                    for (o, delta) in out.iter_mut().zip(&off.delta[idx * hd..(idx + 1) * hd]) {
                        *o += delta;
                    }
                }
                post.data[idx * hd..(idx + 1) * hd].copy_from_slice(out);
                if let Some(a) = attention.as_mut() {
                    a.push(weights);
                }
            }
            matvec(&heads, &layer.wo, &mut proj);
            for (xi, p) in x.iter_mut().zip(&proj) {
                *xi += p;
            }

            layer_norm(&x, &mut ln);
            matvec(&ln, &layer.w1, &mut hidden);
            for (hv, b) in hidden.iter_mut().zip(&layer.b1) {
                *hv = gelu(*hv + b);
            }
            matvec(&hidden, &layer.w2, &mut proj);
            for ((xi, p), b) in x.iter_mut().zip(&proj).zip(&layer.b2) {
                *xi += p + b;
            }
        }
        layer_norm(&x, &mut ln);
        let mut logits = vec![0.0; c.vocab_size];
        matvec(&ln, &self.unembed, &mut logits);
        StepOut { logits, pre, post, attention }
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty token sequence".into()));
        }
        if tokens.len() > self.config.context_len {
            return Err(Error::ContextOverflow(format!(
                "{} tokens exceed context length {}",
                tokens.len(),
                self.config.context_len
            )));
        }
        if let Some(bad) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::InvalidArgument(format!("token {bad} outside vocabulary")));
        }
        Ok(())
    }

    /// Unmodified forward pass.
    pub fn forward(&self, tokens: &[u32]) -> Result<ForwardOutput> {
        self.forward_with(tokens, &[], ForwardOptions::default())
    }

    /// Forward pass with plan offsets applied from `options.intervene_from` on.
    pub fn forward_with(
        &self,
        tokens: &[u32],
        plans: &[InterventionPlan],
        options: ForwardOptions,
    ) -> Result<ForwardOutput> {
        self.check_tokens(tokens)?;
        let offsets = Offsets::build(&self.config, plans)?;
        let mut cache = KvCache::new(&self.config);
        let mut out = ForwardOutput {
            logits: Vec::with_capacity(tokens.len()),
            head_outputs: Vec::new(),
            steered_outputs: Vec::new(),
            attention: options.capture_attention.then(|| {
                vec![vec![Vec::with_capacity(tokens.len()); self.config.n_heads]; self.config.n_layers]
            }),
        };
        for (pos, &tok) in tokens.iter().enumerate() {
            let active = offsets.as_ref().filter(|_| pos >= options.intervene_from);
            let step = self.step(tok, pos, &mut cache, active, options.capture_attention);
            if let (Some(all), Some(rows)) = (out.attention.as_mut(), step.attention) {
                for (i, row) in rows.into_iter().enumerate() {
                    all[i / self.config.n_heads][i % self.config.n_heads].push(row);
                }
            }
            if options.capture_all_positions || pos + 1 == tokens.len() {
                out.head_outputs.push(step.pre);
                out.steered_outputs.push(step.post);
            }
            out.logits.push(step.logits);
        }
        Ok(out)
    }

    /// Greedy decoding; see [`Model::generate_traced`].
    pub fn generate_greedy(
        &self,
        prompt: &[u32],
        max_tokens: usize,
        plans: &[InterventionPlan],
        intervene_on_prompt: bool,
    ) -> Result<Vec<u32>> {
        Ok(self.generate_traced(prompt, max_tokens, plans, intervene_on_prompt, Sampler::Greedy)?.generated)
    }

    /// Autoregressive decoding of `max_tokens` tokens.
    ///
    /// The prompt is left-truncated to `context_len - max_tokens` tokens.
    /// Plans apply at every position whose output selects a generated token
    /// (the last prompt position onward), or at all positions when
    /// `intervene_on_prompt` is set.
    pub fn generate_traced(
        &self,
        prompt: &[u32],
        max_tokens: usize,
        plans: &[InterventionPlan],
        intervene_on_prompt: bool,
        sampler: Sampler,
    ) -> Result<GenerationTrace> {
        let ctx = self.config.context_len;
        if max_tokens >= ctx {
            return Err(Error::ContextOverflow(format!(
                "max_tokens {max_tokens} leaves no room for a prompt in context length {ctx}"
            )));
        }
        let keep = ctx - max_tokens;
        let prompt = &prompt[prompt.len().saturating_sub(keep)..];
        self.check_tokens(prompt)?;
        let offsets = Offsets::build(&self.config, plans)?;
        let intervene_from = if intervene_on_prompt { 0 } else { prompt.len() - 1 };
        let mut rng = match sampler {
            Sampler::Greedy => None,
            Sampler::Sample { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };

        let mut cache = KvCache::new(&self.config);
        let mut trace = GenerationTrace {
            prompt: prompt.to_vec(),
            generated: Vec::with_capacity(max_tokens),
            pre: Vec::with_capacity(max_tokens),
            post: Vec::with_capacity(max_tokens),
        };
        let mut pos = 0;
        let mut last = None;
        for &tok in prompt {
            let active = offsets.as_ref().filter(|_| pos >= intervene_from);
            last = Some(self.step(tok, pos, &mut cache, active, false));
            pos += 1;
        }
        while let Some(step) = last.take() {
            let next = match (sampler, rng.as_mut()) {
                (Sampler::Sample { temperature, top_p, .. }, Some(rng)) => {
                    sample(&step.logits, temperature, top_p, rng)
                }
                _ => argmax(&step.logits),
            };
            trace.generated.push(next);
            trace.pre.push(step.pre);
            trace.post.push(step.post);
            if trace.generated.len() == max_tokens {
                break;
            }
            last = Some(self.step(next, pos, &mut cache, offsets.as_ref(), false));
            pos += 1;
        }
        Ok(trace)
    }

    /// Head outputs at the final position of `tokens`.
    pub fn head_activations(&self, tokens: &[u32]) -> Result<HeadActivations> {
        Ok(self.forward(tokens)?.last_head_outputs().clone())
    }
}

/// Lowest index among the maxima.
fn argmax(logits: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best as u32
}

fn sample(logits: &[f64], temperature: f64, top_p: Option<f64>, rng: &mut ChaCha8Rng) -> u32 {
    if temperature <= 0.0 {
        return argmax(logits);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<(usize, f64)> =
        logits.iter().enumerate().map(|(i, &l)| (i, ((l - max) / temperature).exp())).collect();
    let total: f64 = probs.iter().map(|p| p.1).sum();
    for p in &mut probs {
        p.1 /= total;
    }
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(top_p) = top_p {
        let mut mass = 0.0;
        let mut keep = 0;
        for p in &probs {
            mass += p.1;
            keep += 1;
            if mass >= top_p {
                break;
            }
        }
        probs.truncate(keep);
    }
    let total: f64 = probs.iter().map(|p| p.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(i, p) in &probs {
        if u < p {
            return i as u32;
        }
        u -= p;
    }
    probs.last().map_or(0, |p| p.0 as u32)
}
