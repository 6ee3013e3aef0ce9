use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{HeadId, ModelConfig};
use crate::error::{Error, Result};

/// Residual dimensions reserved for the dialect signal in planted models.
pub(crate) const RESERVED_DIMS: usize = 2;

/// Wiring of a planted dialect head.
///
/// Tokens in the upper half of the vocabulary form dialect 1. Their embedding
/// carries `(+c, -c)` on residual dims 0 and 1; dialect-0 tokens carry
/// `(-c, +c)`. No other component reads or writes those two dims except the
/// planted head, which attends uniformly over the prefix, reads `ln0 - ln1`
/// into value dim 0 with gain `g_v`, and writes `(+g_o, -g_o)` back. The
/// unembedding maps dims 0 and 1 to `±kappa` on every token by dialect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedSpec {
    pub head: HeadId,
    pub c: f64,
    pub g_v: f64,
    pub g_o: f64,
    pub kappa: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec { head: HeadId::new(2, 1), c: 1.0, g_v: 1.0, g_o: 0.04, kappa: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    /// `d x d` row-major maps from normalized input to concatenated heads.
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    /// `d x d` from concatenated head outputs to the residual stream.
    pub wo: Vec<f64>,
    /// `d x 4d`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `4d x d`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// An immutable set of transformer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) config: ModelConfig,
    pub(crate) planted: Option<PlantedSpec>,
    /// `vocab x d`
    pub(crate) embed: Vec<f64>,
    /// `d x vocab`
    pub(crate) unembed: Vec<f64>,
    pub(crate) layers: Vec<Layer>,
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, std).expect("finite positive std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

impl Model {
    /// Seeded random weights.
    pub fn random(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.d_model();
        let v = config.vocab_size;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let inv = (1.0 / d as f64).sqrt();
        let embed = normal_vec(&mut rng, v * d, 1.0);
        let unembed = normal_vec(&mut rng, d * v, inv);
        let layers = (0..config.n_layers)
            .map(|_| Layer {
                wq: normal_vec(&mut rng, d * d, inv),
                wk: normal_vec(&mut rng, d * d, inv),
                wv: normal_vec(&mut rng, d * d, inv),
                wo: normal_vec(&mut rng, d * d, inv),
                w1: normal_vec(&mut rng, d * 4 * d, inv),
                b1: vec![0.0; 4 * d],
                w2: normal_vec(&mut rng, 4 * d * d, (1.0 / (4 * d) as f64).sqrt()),
                b2: vec![0.0; d],
            })
            .collect();
        Ok(Model { config, planted: None, embed, unembed, layers })
    }

    /// Seeded random weights with one planted dialect head.
    pub fn planted(config: ModelConfig, spec: PlantedSpec) -> Result<Self> {
        config.check_head(spec.head)?;
        if config.vocab_size % 2 != 0 || config.head_dim < 1 || config.d_model() <= RESERVED_DIMS {
            return Err(Error::InvalidArgument(
                "planted models need an even vocabulary and d_model > 2".into(),
            ));
        }
        let values = [spec.c, spec.g_v, spec.g_o, spec.kappa];
        if values.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidArgument("planted constants must be finite and positive".into()));
        }
        let mut m = Model::random(config)?;
        let d = config.d_model();
        let vocab = config.vocab_size;
        let half = vocab / 2;
        let hd = config.head_dim;

        // Embedding: the random part depends only on the position within the
        // half, so both dialects share their non-reserved coordinates.
        for t in half..vocab {
            let (lo, hi) = m.embed.split_at_mut(t * d);
            hi[..d].copy_from_slice(&lo[(t - half) * d..(t - half + 1) * d]);
        }
        for t in 0..vocab {
            let s = if t >= half { 1.0 } else { -1.0 };
            m.embed[t * d] = s * spec.c;
            m.embed[t * d + 1] = -s * spec.c;
        }
        for t in 0..vocab {
            let s = if t >= half { 1.0 } else { -1.0 };
            m.unembed[t] = s * spec.kappa;
            m.unembed[vocab + t] = -s * spec.kappa;
        }

        for (l, layer) in m.layers.iter_mut().enumerate() {
            for r in 0..RESERVED_DIMS {
                for w in [&mut layer.wq, &mut layer.wk, &mut layer.wv] {
                    w[r * d..(r + 1) * d].fill(0.0);
                }
                for row in 0..d {
                    layer.wo[row * d + r] = 0.0;
                }
                layer.w1[r * 4 * d..(r + 1) * 4 * d].fill(0.0);
                for row in 0..4 * d {
                    layer.w2[row * d + r] = 0.0;
                }
                layer.b2[r] = 0.0;
            }
            if l == spec.head.layer {
                let base = spec.head.head * hd;
                for row in 0..d {
                    for k in 0..hd {
                        layer.wq[row * d + base + k] = 0.0;
                        layer.wk[row * d + base + k] = 0.0;
                    }
                    layer.wv[row * d + base] = 0.0;
                }
                layer.wv[base] = spec.g_v;
                layer.wv[d + base] = -spec.g_v;
                let row = base * d;
                layer.wo[row..row + d].fill(0.0);
                layer.wo[row] = spec.g_o;
                layer.wo[row + 1] = -spec.g_o;
            }
        }
        m.planted = Some(spec);
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn planted_spec(&self) -> Option<&PlantedSpec> {
        self.planted.as_ref()
    }

    /// Sinusoidal position code; zero on the reserved dims of planted models.
    pub(crate) fn positional(&self, pos: usize, out: &mut [f64]) {
        let d = self.config.d_model();
        let skip = if self.planted.is_some() { RESERVED_DIMS } else { 0 };
        for (i, o) in out.iter_mut().enumerate() {
            if i < skip {
                *o = 0.0;
                continue;
            }
            let rate = 10_000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            *o = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }

    pub(crate) fn parts(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let d = self.config.d_model();
        let v = self.config.vocab_size;
        let mut out = vec![
            ("embed".to_string(), vec![v, d], self.embed.as_slice()),
            ("unembed".to_string(), vec![d, v], self.unembed.as_slice()),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            let named: [(&str, Vec<usize>, &[f64]); 8] = [
                ("wq", vec![d, d], &layer.wq),
                ("wk", vec![d, d], &layer.wk),
                ("wv", vec![d, d], &layer.wv),
                ("wo", vec![d, d], &layer.wo),
                ("w1", vec![d, 4 * d], &layer.w1),
                ("b1", vec![4 * d], &layer.b1),
                ("w2", vec![4 * d, d], &layer.w2),
                ("b2", vec![d], &layer.b2),
            ];
            for (name, shape, data) in named {
                out.push((format!("layers.{l}.{name}"), shape, data));
            }
        }
        out
    }
}
