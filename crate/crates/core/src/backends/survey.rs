use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use super::{Backend, GenerationParams};
use crate::error::{Error, Result};
use crate::harness::{build_prompt, LabelTable, ResponseRecord, TemplateSet};
use crate::questionnaire::Questionnaire;

/// Inputs of one survey.
#[derive(Debug, Clone, Copy)]
pub struct SurveyTask<'a> {
    pub questionnaire: &'a Questionnaire,
    pub templates: &'a TemplateSet,
    pub languages: &'a [String],
    pub params: &'a GenerationParams,
    pub labels: &'a LabelTable,
}

#[derive(Debug, Clone, Default)]
pub struct SurveyOptions {
    /// Written into every record instead of the wall clock.
    pub fixed_timestamp: Option<String>,
}

struct Job {
    proposition: usize,
    paraphrase: usize,
    language: usize,
    prompt: String,
}

/// Collects every record of a survey in deterministic order.
pub fn run_survey(backend: &dyn Backend, task: &SurveyTask<'_>) -> Result<Vec<ResponseRecord>> {
    let mut out = Vec::new();
    run_survey_with(backend, task, &SurveyOptions::default(), &mut |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Streams records to `sink` ordered by (proposition, paraphrase, language).
///
/// Generation failures become Unknown records carrying an `error` note. An
/// error returned by `sink` stops the survey and is propagated.
pub fn run_survey_with(
    backend: &dyn Backend,
    task: &SurveyTask<'_>,
    options: &SurveyOptions,
    sink: &mut dyn FnMut(ResponseRecord) -> Result<()>,
) -> Result<()> {
    task.params.validate()?;
    let q = task.questionnaire;
    for lang in task.languages {
        if !q.languages.contains(lang) || !task.templates.languages.contains(lang) {
            return Err(Error::MissingLanguage(lang.clone()));
        }
    }
    let mut jobs = Vec::with_capacity(q.len() * task.templates.templates.len() * task.languages.len());
    for (pi, p) in q.propositions.iter().enumerate() {
        for t in &task.templates.templates {
            for (li, lang) in task.languages.iter().enumerate() {
                jobs.push(Job { proposition: pi, paraphrase: t.id, language: li, prompt: build_prompt(t, p, lang)? });
            }
        }
    }
    let params_id = task.params.id();
    let make_record = |job: &Job, outcome: Result<String>| {
        let lang = &task.languages[job.language];
        let (raw_text, error) = match outcome {
            Ok(text) => (text, None),
            Err(e) => (String::new(), Some(e.to_string())),
        };
        let parsed = if error.is_some() {
            crate::harness::Parsed::Unknown
        } else {
            task.labels.parse_choice(&raw_text, lang)
        };
        ResponseRecord {
            proposition_id: q.propositions[job.proposition].id.clone(),
            language: lang.clone(),
            paraphrase_id: job.paraphrase,
            raw_text,
            parsed,
            backend_id: backend.id().to_string(),
            generation_params_id: params_id.clone(),
            timestamp: options.fixed_timestamp.clone().unwrap_or_else(now_rfc3339),
            error,
        }
    };

    let workers = backend.max_in_flight().clamp(1, jobs.len().max(1));
    if workers == 1 {
        for job in &jobs {
            sink(make_record(job, backend.generate(&job.prompt, task.params)))?;
        }
        return Ok(());
    }

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, ResponseRecord)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, stop, make_record) = (&jobs, &next, &stop, &make_record);
            scope.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let record = make_record(job, backend.generate(&job.prompt, task.params));
                    if tx.send((i, record)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for (i, record) in rx {
            pending.insert(i, record);
            while let Some(record) = pending.remove(&emitted) {
                if let Err(e) = sink(record) {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e);
                }
                emitted += 1;
            }
        }
        Ok(())
    })
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
