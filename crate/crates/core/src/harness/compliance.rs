//! Unknown-response counts and choice frequencies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::parse::Parsed;
use super::records::ResponseRecord;

/// Unknown counts for one (backend, language), summarized across paraphrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceCell {
    pub language: String,
    pub backend_id: String,
    pub mean_unknowns: f64,
    /// Population standard deviation across paraphrases.
    pub std_unknowns: f64,
    pub n_paraphrases: usize,
    pub total_unknowns: usize,
}

/// One cell per (backend, language) present in `records`, sorted by key.
pub fn compliance_table(records: &[ResponseRecord]) -> Vec<ComplianceCell> {
    let mut groups: BTreeMap<(&str, &str), BTreeMap<usize, usize>> = BTreeMap::new();
    for r in records {
        let per_paraphrase = groups.entry((&r.backend_id, &r.language)).or_default();
        *per_paraphrase.entry(r.paraphrase_id).or_insert(0) += usize::from(r.parsed.is_unknown());
    }
    groups
        .into_iter()
        .map(|((backend, language), counts)| {
            let n = counts.len();
            let total: usize = counts.values().sum();
            let mean = total as f64 / n as f64;
            let var = counts.values().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n as f64;
            ComplianceCell {
                language: language.to_string(),
                backend_id: backend.to_string(),
                mean_unknowns: mean,
                std_unknowns: var.sqrt(),
                n_paraphrases: n,
                total_unknowns: total,
            }
        })
        .collect()
}

/// Exact counts per (backend, parsed value); absent pairs are omitted.
pub fn choice_distribution(records: &[ResponseRecord]) -> BTreeMap<(String, Parsed), usize> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry((r.backend_id.clone(), r.parsed)).or_insert(0) += 1;
    }
    out
}
