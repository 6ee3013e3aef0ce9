//! Flat little-endian `f64` tensor dumps with a JSON sidecar manifest.
//!
//! `name.bin` holds the tensors back to back; `name.json` lists each
//! tensor's name, shape and byte offset plus free-form metadata.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::Layer;
use super::{Model, ModelConfig, PlantedSpec};
use crate::error::{Error, Result};

const FORMAT: &str = "compass-tensors/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub metadata: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl TensorFile {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::MalformedTensors(format!("missing tensor `{name}`")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format: String,
    dtype: String,
    endianness: String,
    metadata: serde_json::Value,
    tensors: Vec<Entry>,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

/// The sidecar path belonging to a `.bin` tensor dump.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_tensors(bin: &Path, file: &TensorFile) -> Result<()> {
    let mut bytes = Vec::new();
    let mut entries = Vec::with_capacity(file.tensors.len());
    for t in &file.tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::MalformedTensors(format!("tensor `{}` shape and length disagree", t.name)));
        }
        entries.push(Entry { name: t.name.clone(), shape: t.shape.clone(), offset: bytes.len() });
        for v in &t.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        format: FORMAT.into(),
        dtype: "f64".into(),
        endianness: "little".into(),
        metadata: file.metadata.clone(),
        tensors: entries,
        sha256: crate::util::sha256_hex(&bytes),
    };
    std::fs::write(bin, &bytes).map_err(|e| Error::io(bin, e))?;
    let side = sidecar_path(bin);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub fn read_tensors(bin: &Path) -> Result<TensorFile> {
    let side = sidecar_path(bin);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar =
        serde_json::from_str(&text).map_err(|e| Error::MalformedTensors(format!("{}: {e}", side.display())))?;
    if sidecar.format != FORMAT || sidecar.dtype != "f64" || sidecar.endianness != "little" {
        return Err(Error::MalformedTensors(format!(
            "unsupported container {} / {} / {}",
            sidecar.format, sidecar.dtype, sidecar.endianness
        )));
    }
    let bytes = std::fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if crate::util::sha256_hex(&bytes) != sidecar.sha256 {
        return Err(Error::MalformedTensors(format!("{}: checksum mismatch", bin.display())));
    }
    let mut tensors = Vec::with_capacity(sidecar.tensors.len());
    for e in sidecar.tensors {
        let len = e.shape.iter().product::<usize>();
        let end = len.checked_mul(8).and_then(|n| n.checked_add(e.offset));
        let raw = end
            .and_then(|end| bytes.get(e.offset..end))
            .filter(|_| e.offset % 8 == 0)
            .ok_or_else(|| Error::MalformedTensors(format!("tensor `{}` lies outside the data file", e.name)))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        tensors.push(Tensor { name: e.name, shape: e.shape, data });
    }
    Ok(TensorFile { metadata: sidecar.metadata, tensors })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    kind: String,
    config: ModelConfig,
    planted: Option<PlantedSpec>,
}

impl Model {
    pub fn save(&self, bin: &Path) -> Result<()> {
        let meta = CheckpointMeta { kind: "toy-transformer".into(), config: self.config, planted: self.planted };
        let tensors = self
            .parts()
            .into_iter()
            .map(|(name, shape, data)| Tensor { name, shape, data: data.to_vec() })
            .collect();
        write_tensors(bin, &TensorFile { metadata: serde_json::to_value(meta).expect("meta serializes"), tensors })
    }

    pub fn load(bin: &Path) -> Result<Self> {
        let file = read_tensors(bin)?;
        let meta: CheckpointMeta = serde_json::from_value(file.metadata.clone())
            .map_err(|e| Error::MalformedTensors(format!("checkpoint metadata: {e}")))?;
        if meta.kind != "toy-transformer" {
            return Err(Error::MalformedTensors(format!("not a checkpoint: kind `{}`", meta.kind)));
        }
        meta.config.validate()?;
        let c = meta.config;
        let (d, v) = (c.d_model(), c.vocab_size);
        let take = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            let t = file.get(name)?;
            if t.shape != shape {
                return Err(Error::MalformedTensors(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape)));
            }
            Ok(t.data.clone())
        };
        let layers = (0..c.n_layers)
            .map(|l| {
                let p = |n: &str| format!("layers.{l}.{n}");
                Ok(Layer {
                    wq: take(&p("wq"), &[d, d])?,
                    wk: take(&p("wk"), &[d, d])?,
                    wv: take(&p("wv"), &[d, d])?,
                    wo: take(&p("wo"), &[d, d])?,
                    w1: take(&p("w1"), &[d, 4 * d])?,
                    b1: take(&p("b1"), &[4 * d])?,
                    w2: take(&p("w2"), &[4 * d, d])?,
                    b2: take(&p("b2"), &[d])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            config: c,
            planted: meta.planted,
            embed: take("embed", &[v, d])?,
            unembed: take("unembed", &[d, v])?,
            layers,
        })
    }
}
