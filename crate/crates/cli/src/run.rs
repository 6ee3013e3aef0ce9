use std::collections::BTreeMap;
use std::path::Path;

use compass_core::backends::{run_survey_with, Backend, SurveyOptions, SurveyTask};
use compass_core::error::Error as CoreError;
use compass_core::harness::{LogHeader, LogWriter, LOG_FORMAT};
use compass_core::util::sha256_hex;
use tracing::info;

use crate::config::Loaded;
use crate::error::{read, CliError, Result};
use crate::rundir::{self, BackendEntry, DirLock, LogEntry, RunManifest, EPOCH, MANIFEST_FORMAT};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Epoch timestamps and a run id derived from the config bytes.
    pub reproducible: bool,
    /// Abort after this many records have been written (fault injection).
    pub fail_after: Option<usize>,
}

pub const TOOL_VERSION: &str = concat!("compass ", env!("CARGO_PKG_VERSION"));

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Surveys every configured backend in every language into `out`.
pub fn cmd_run(cfg: &Loaded, out: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let exp = &cfg.config.experiment;
    if cfg.config.backends.is_empty() {
        return Err(cfg.invalid("no [[backend]] configured".into()));
    }
    let backends = cfg
        .config
        .backends
        .iter()
        .map(|d| d.build(&cfg.base_dir))
        .collect::<Result<Vec<_>, _>>()?;

    rundir::prepare_empty(out)?;
    let _lock = DirLock::acquire(out)?;
    let logs_dir = out.join(rundir::LOG_DIR);
    std::fs::create_dir_all(&logs_dir).map_err(CliError::io(&logs_dir))?;

    let started = if opts.reproducible { EPOCH.to_string() } else { now() };
    let run_id = if opts.reproducible {
        format!("run-{}", &sha256_hex(format!("{}\n{TOOL_VERSION}", cfg.sha256).as_bytes())[..16])
    } else {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        format!("run-{stamp}-{}", &cfg.sha256[..8])
    };
    let task = SurveyTask {
        questionnaire: &cfg.questionnaire,
        templates: &cfg.templates,
        languages: &exp.languages,
        params: &cfg.params,
        labels: &cfg.labels,
    };
    let survey_opts = SurveyOptions { fixed_timestamp: opts.reproducible.then(|| EPOCH.to_string()) };

    let mut files = Vec::new();
    let mut written = 0usize;
    for backend in &backends {
        info!(backend = backend.id(), languages = exp.languages.len(), "surveying");
        let mut writers = BTreeMap::new();
        for lang in &exp.languages {
            let header = LogHeader {
                log_format: LOG_FORMAT.to_string(),
                run_id: run_id.clone(),
                backend_id: backend.id().to_string(),
                backend_kind: backend.kind().as_str().to_string(),
                language: lang.clone(),
                generation_params_id: cfg.params.id(),
                generation_params: cfg.params.clone(),
                seed_sent: backend.seed_sent(),
                questionnaire_sha256: cfg.questionnaire.source_hash.clone(),
                created: started.clone(),
            };
            let rel = rundir::log_name(backend.id(), lang);
            writers.insert(lang.clone(), (LogWriter::create(&out.join(&rel), &header)?, rel, 0usize));
        }
        let mut failures = 0usize;
        let mut first_error = None;
        run_survey_with(backend.as_ref(), &task, &survey_opts, &mut |record| {
            if opts.fail_after.is_some_and(|n| written >= n) {
                return Err(CoreError::InvalidArgument(format!("injected fault after {written} records")));
            }
            if let Some(e) = &record.error {
                failures += 1;
                first_error.get_or_insert_with(|| e.clone());
            }
            let (w, _, n) = writers.get_mut(&record.language).expect("writer per survey language");
            w.append(&record)?;
            *n += 1;
            written += 1;
            Ok(())
        })?;
        let total: usize = writers.values().map(|(_, _, n)| n).sum();
        if total > 0 && failures == total {
            return Err(CliError::Core(CoreError::Network(format!(
                "backend `{}` failed every request: {}",
                backend.id(),
                first_error.unwrap_or_default()
            ))));
        }
        for (lang, (w, rel, n)) in writers {
            w.finish()?;
            files.push(LogEntry {
                sha256: sha256_hex(&read(&out.join(&rel))?),
                path: rel,
                backend_id: backend.id().to_string(),
                language: lang,
                records: n,
            });
        }
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let manifest = RunManifest {
        format: MANIFEST_FORMAT.to_string(),
        run_id,
        experiment: exp.name.clone(),
        tool_version: TOOL_VERSION.to_string(),
        config_sha256: cfg.sha256.clone(),
        questionnaire_sha256: cfg.questionnaire.source_hash.clone(),
        generation_params_id: cfg.params.id(),
        generation_params: cfg.params.clone(),
        languages: exp.languages.clone(),
        paraphrase_ids: cfg.templates.templates.iter().map(|t| t.id).collect(),
        backends: backends.iter().map(|b| entry(b.as_ref())).collect(),
        started: started.clone(),
        finished: if opts.reproducible { EPOCH.to_string() } else { now() },
        files,
    };
    rundir::write_manifest(out, &manifest)?;
    info!(run_id = %manifest.run_id, records = written, "run complete");
    Ok(manifest)
}

fn entry(b: &dyn Backend) -> BackendEntry {
    BackendEntry { id: b.id().to_string(), kind: b.kind().as_str().to_string(), seed_sent: b.seed_sent() }
}
