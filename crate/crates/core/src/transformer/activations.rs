use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensors::{read_tensors, write_tensors, Tensor, TensorFile};
use super::{HeadId, LabeledSequence, Model, ModelConfig};
use crate::error::{Error, Result};

/// Last-position head outputs of a labeled corpus, one row per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDataset {
    pub n_layers: usize,
    pub n_heads: usize,
    pub head_dim: usize,
    pub labels: Vec<u8>,
    /// Split groups per row; rows of one group never straddle a split.
    pub groups: Option<Vec<usize>>,
    /// `[row][layer][head][dim]`, flattened
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetMeta {
    kind: String,
    n_layers: usize,
    n_heads: usize,
    head_dim: usize,
}

impl ActivationDataset {
    /// Builds a dataset from per-row concatenated head outputs.
    pub fn from_rows(n_layers: usize, n_heads: usize, head_dim: usize, rows: Vec<(Vec<f64>, u8)>) -> Result<Self> {
        let width = n_layers * n_heads * head_dim;
        if width == 0 {
            return Err(Error::InvalidArgument("dataset dimensions must be positive".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * width);
        let mut labels = Vec::with_capacity(rows.len());
        for (row, label) in rows {
            if row.len() != width || label > 1 {
                return Err(Error::InvalidArgument("dataset row has wrong width or non-binary label".into()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("dataset row has non-finite entries".into()));
            }
            data.extend(row);
            labels.push(label);
        }
        Ok(ActivationDataset { n_layers, n_heads, head_dim, labels, groups: None, data })
    }

    /// Attaches split groups, one per row.
    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(Error::InvalidArgument("one group per row is required".into()));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn heads(&self) -> Vec<HeadId> {
        (0..self.n_layers)
            .flat_map(|l| (0..self.n_heads).map(move |h| HeadId::new(l, h)))
            .collect()
    }

    /// One head's activation vector in row `row`.
    pub fn row(&self, row: usize, head: HeadId) -> &[f64] {
        let width = self.n_layers * self.n_heads * self.head_dim;
        let start = row * width + (head.layer * self.n_heads + head.head) * self.head_dim;
        &self.data[start..start + self.head_dim]
    }

    /// All rows of one head.
    pub fn head_rows(&self, head: HeadId) -> Vec<&[f64]> {
        (0..self.len()).map(|r| self.row(r, head)).collect()
    }

    pub fn save(&self, bin: &Path) -> Result<()> {
        let meta = DatasetMeta {
            kind: "activation-dataset".into(),
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            head_dim: self.head_dim,
        };
        let mut file = TensorFile {
            metadata: serde_json::to_value(meta).expect("meta serializes"),
            tensors: vec![
                Tensor {
                    name: "activations".into(),
                    shape: vec![self.len(), self.n_layers * self.n_heads, self.head_dim],
                    data: self.data.clone(),
                },
                Tensor {
                    name: "labels".into(),
                    shape: vec![self.len()],
                    data: self.labels.iter().map(|&l| f64::from(l)).collect(),
                },
            ],
        };
        if let Some(groups) = &self.groups {
            file.tensors.push(Tensor {
                name: "groups".into(),
                shape: vec![self.len()],
                data: groups.iter().map(|&g| g as f64).collect(),
            });
        }
        write_tensors(bin, &file)
    }

    pub fn load(bin: &Path) -> Result<Self> {
        let file = read_tensors(bin)?;
        let meta: DatasetMeta = serde_json::from_value(file.metadata.clone())
            .map_err(|e| Error::MalformedTensors(format!("dataset metadata: {e}")))?;
        if meta.kind != "activation-dataset" {
            return Err(Error::MalformedTensors(format!("not an activation dataset: kind `{}`", meta.kind)));
        }
        let acts = file.get("activations")?;
        let labels = file.get("labels")?;
        let rows = labels.data.len();
        if acts.shape != [rows, meta.n_layers * meta.n_heads, meta.head_dim] {
            return Err(Error::MalformedTensors(format!("activation shape {:?} disagrees with metadata", acts.shape)));
        }
        let labels = labels
            .data
            .iter()
            .map(|&l| match l {
                0.0 => Ok(0),
                1.0 => Ok(1),
                other => Err(Error::MalformedTensors(format!("non-binary label {other}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let groups = match file.tensors.iter().find(|t| t.name == "groups") {
            Some(t) if t.shape == [rows] => Some(t.data.iter().map(|&g| g as usize).collect()),
            Some(_) => return Err(Error::MalformedTensors("groups tensor has the wrong shape".into())),
            None => None,
        };
        Ok(ActivationDataset {
            n_layers: meta.n_layers,
            n_heads: meta.n_heads,
            head_dim: meta.head_dim,
            labels,
            groups,
            data: acts.data.clone(),
        })
    }

    fn for_config(config: &ModelConfig) -> Self {
        ActivationDataset {
            n_layers: config.n_layers,
            n_heads: config.n_heads,
            head_dim: config.head_dim,
            labels: Vec::new(),
            groups: None,
            data: Vec::new(),
        }
    }
}

/// Runs every sequence and records its last-position head outputs.
pub fn collect_head_activations(model: &Model, corpus: &[LabeledSequence]) -> Result<ActivationDataset> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("activation corpus"));
    }
    let mut ds = ActivationDataset::for_config(model.config());
    let grouped = corpus.iter().all(|s| s.group.is_some());
    if grouped {
        ds.groups = Some(corpus.iter().filter_map(|s| s.group).collect());
    }
    for seq in corpus {
        if seq.label > 1 {
            return Err(Error::InvalidArgument(format!("label {} is not binary", seq.label)));
        }
        let acts = model.head_activations(&seq.tokens)?;
        ds.data.extend_from_slice(acts.as_slice());
        ds.labels.push(seq.label);
    }
    Ok(ds)
}
