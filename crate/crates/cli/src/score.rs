use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use compass_core::harness::{compliance_table, score_records, ComplianceCell, Impute, ResponseRecord};
use compass_core::questionnaire::Questionnaire;
use compass_core::scoring::{aggregate_runs, Aggregate, CompassPoint};

use crate::error::Result;
use crate::rundir::LoadedRun;

pub const RESULTS_FORMAT: &str = "compass-results/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub format: String,
    pub run_id: String,
    pub experiment: String,
    pub questionnaire_sha256: String,
    pub generation_params_id: String,
    pub impute: Impute,
    pub languages: Vec<String>,
    pub models: Vec<ModelResults>,
    pub compliance: Vec<ComplianceCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelResults {
    pub backend_id: String,
    pub backend_kind: String,
    pub languages: Vec<LanguageResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageResult {
    pub language: String,
    /// Absent when every paraphrase was skipped.
    pub aggregate: Option<Aggregate>,
    pub paraphrases: Vec<ParaphrasePoint>,
    pub skipped: Vec<SkippedRun>,
    pub unknowns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParaphrasePoint {
    pub paraphrase_id: usize,
    pub point: CompassPoint,
    pub imputed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkippedRun {
    pub paraphrase_id: usize,
    pub unknowns: usize,
}

impl ModelResults {
    pub fn language(&self, lang: &str) -> Option<&LanguageResult> {
        self.languages.iter().find(|l| l.language == lang)
    }
}

/// Scores `records` into one block per backend, languages in the given order.
pub fn summarize(
    records: &[ResponseRecord],
    q: &Questionnaire,
    impute: Impute,
    backends: &[(String, String)],
    languages: &[String],
) -> Result<Vec<ModelResults>> {
    let scored = score_records(records, q, impute)?;
    let mut unknowns: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for r in records {
        *unknowns.entry((&r.backend_id, &r.language)).or_insert(0) += usize::from(r.parsed.is_unknown());
    }
    let mut models = Vec::with_capacity(backends.len());
    for (id, kind) in backends {
        let mut langs = Vec::with_capacity(languages.len());
        for lang in languages {
            let paraphrases: Vec<ParaphrasePoint> = scored
                .scores
                .iter()
                .filter(|s| &s.backend_id == id && &s.language == lang)
                .map(|s| ParaphrasePoint { paraphrase_id: s.paraphrase_id, point: s.point, imputed: s.imputed })
                .collect();
            let skipped = scored
                .skipped
                .iter()
                .filter(|s| &s.backend_id == id && &s.language == lang)
                .map(|s| SkippedRun { paraphrase_id: s.paraphrase_id, unknowns: s.unknowns })
                .collect();
            let points: Vec<CompassPoint> = paraphrases.iter().map(|p| p.point).collect();
            langs.push(LanguageResult {
                language: lang.clone(),
                aggregate: if points.is_empty() { None } else { Some(aggregate_runs(&points)?) },
                paraphrases,
                skipped,
                unknowns: unknowns.get(&(id.as_str(), lang.as_str())).copied().unwrap_or(0),
            });
        }
        models.push(ModelResults { backend_id: id.clone(), backend_kind: kind.clone(), languages: langs });
    }
    Ok(models)
}

/// Per-(backend, language) aggregate points of a complete run.
pub fn cmd_score(run: &LoadedRun, q: &Questionnaire, impute: Impute) -> Result<ResultsFile> {
    let m = &run.manifest;
    if !q.source_hash.is_empty() && q.source_hash != m.questionnaire_sha256 {
        return Err(crate::error::CliError::Mismatch(format!(
            "run used questionnaire {} but {} was supplied",
            m.questionnaire_sha256, q.source_hash
        )));
    }
    let records: Vec<ResponseRecord> = run.records().cloned().collect();
    let backends: Vec<(String, String)> = m.backends.iter().map(|b| (b.id.clone(), b.kind.clone())).collect();
    let models = summarize(&records, q, impute, &backends, &m.languages)?;
    Ok(ResultsFile {
        format: RESULTS_FORMAT.to_string(),
        run_id: m.run_id.clone(),
        experiment: m.experiment.clone(),
        questionnaire_sha256: m.questionnaire_sha256.clone(),
        generation_params_id: m.generation_params_id.clone(),
        impute,
        languages: m.languages.clone(),
        models,
        compliance: compliance_table(&records),
    })
}
