//! Prompt assembly, completion parsing, response logs and compliance
//! statistics.

mod compliance;
mod parse;
mod records;
mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use compliance::{choice_distribution, compliance_table, ComplianceCell};
pub use parse::{normalize, parse_choice, LabelTable, Parsed, CANONICAL_LABELS};
pub use records::{parse_log, read_log, LogHeader, LogWriter, ResponseRecord, LOG_FORMAT};
pub use templates::{build_prompt, PromptTemplate, TemplateSet, CANONICAL_PARAPHRASES, CANONICAL_TEMPLATES};

use crate::error::{Error, Result};
use crate::questionnaire::{AnswerChoice, Questionnaire};
use crate::scoring::{score, Answers, CompassPoint};

/// Treatment of Unknown answers before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impute {
    /// Score only paraphrase runs whose every answer parsed.
    #[default]
    Skip,
    /// Replace each Unknown with a fixed answer.
    Fallback(AnswerChoice),
}

impl Impute {
    /// The configurable fallback policy: Unknown scored as Disagree.
    pub const DEFAULT_FALLBACK: Impute = Impute::Fallback(AnswerChoice::Disagree);
}

impl FromStr for Impute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "skip" => Ok(Impute::Skip),
            "fallback" => Ok(Self::DEFAULT_FALLBACK),
            other => AnswerChoice::from_key(other).map(Impute::Fallback).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "impute policy `{s}`: expected skip, fallback, or a choice such as disagree"
                ))
            }),
        }
    }
}

impl fmt::Display for Impute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Impute::Skip => f.write_str("skip"),
            Impute::Fallback(c) => write!(f, "{}", Parsed::Choice(*c).as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseScore {
    pub backend_id: String,
    pub language: String,
    pub paraphrase_id: usize,
    pub point: CompassPoint,
    /// Unknown answers replaced by the fallback.
    pub imputed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedParaphrase {
    pub backend_id: String,
    pub language: String,
    pub paraphrase_id: usize,
    pub unknowns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecords {
    pub impute: Impute,
    pub scores: Vec<ParaphraseScore>,
    pub skipped: Vec<SkippedParaphrase>,
}

/// Scores every (backend, language, paraphrase) run in `records`.
///
/// Each run must hold exactly one record per proposition.
pub fn score_records(
    records: &[ResponseRecord],
    q: &Questionnaire,
    impute: Impute,
) -> Result<ScoredRecords> {
    type Key<'a> = (&'a str, &'a str, usize);
    let mut runs: BTreeMap<Key<'_>, BTreeMap<&str, Parsed>> = BTreeMap::new();
    for r in records {
        let run = runs.entry((&r.backend_id, &r.language, r.paraphrase_id)).or_default();
        if run.insert(&r.proposition_id, r.parsed).is_some() {
            return Err(Error::MalformedLog(format!(
                "duplicate record for `{}` ({}, {}, paraphrase {})",
                r.proposition_id, r.backend_id, r.language, r.paraphrase_id
            )));
        }
    }
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for ((backend, language, paraphrase_id), parsed) in runs {
        let unknowns = parsed.values().filter(|p| p.is_unknown()).count();
        let fallback = match impute {
            Impute::Skip if unknowns > 0 => {
                skipped.push(SkippedParaphrase {
                    backend_id: backend.to_string(),
                    language: language.to_string(),
                    paraphrase_id,
                    unknowns,
                });
                continue;
            }
            Impute::Skip => AnswerChoice::Disagree,
            Impute::Fallback(c) => c,
        };
        let answers: Answers = parsed
            .iter()
            .map(|(id, p)| (id.to_string(), p.choice().unwrap_or(fallback)))
            .collect();
        let point = score(&answers, q, &q.scoring)?;
        scores.push(ParaphraseScore {
            backend_id: backend.to_string(),
            language: language.to_string(),
            paraphrase_id,
            point,
            imputed: if impute == Impute::Skip { 0 } else { unknowns },
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("zero scoreable paraphrases"));
    }
    Ok(ScoredRecords { impute, scores, skipped })
}
