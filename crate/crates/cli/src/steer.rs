//! `steer collect | probe | plan | eval`, sharing one artifact directory:
//! `model.bin`, `activations.bin`, `probes.json`, `plan.json`, `eval.json`
//! and `eval.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use compass_core::backends::{run_survey_with, ParamsPreset, Readout, SurveyOptions, SurveyTask, ToyBackend};
use compass_core::harness::{compliance_table, Impute, ResponseRecord};
use compass_core::steering::{
    select_top_heads, steering_direction, train_probes, InterventionPlan, ProbeConfig, ProbeReport, Sign,
};
use compass_core::transformer::{collect_head_activations, ActivationDataset, HeadId, Model};
use tracing::info;

use crate::config::Loaded;
use crate::error::{read_json, write, write_json, CliError, Result};
use crate::rundir::EPOCH;
use crate::score::{summarize, ModelResults};

pub const MODEL: &str = "model.bin";
pub const ACTIVATIONS: &str = "activations.bin";
pub const PROBES: &str = "probes.json";
pub const PLAN: &str = "plan.json";
pub const EVAL: &str = "eval.json";
pub const EVAL_REPORT: &str = "eval.txt";

const TOY_ID: &str = "toy";

fn artifact(dir: &Path, name: &str, producer: &'static str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { path, producer })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectSummary {
    pub rows: usize,
    pub per_class: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub planted_head: Option<HeadId>,
}

/// Builds (or loads) the toy model and records per-head activations on the
/// labeled corpus.
pub fn collect(cfg: &Loaded, out: &Path) -> Result<CollectSummary> {
    let steer = cfg.steer()?;
    let model = match (&steer.checkpoint, steer.planted) {
        (Some(p), _) => Model::load(&cfg.resolve(p))?,
        (None, Some(spec)) => Model::planted(steer.model, spec)?,
        (None, None) => Model::random(steer.model)?,
    };
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    model.save(&out.join(MODEL))?;
    let corpus = steer.corpus.generate(model.config().vocab_size)?;
    let ds = collect_head_activations(&model, &corpus)?;
    ds.save(&out.join(ACTIVATIONS))?;
    let summary = CollectSummary {
        rows: ds.len(),
        per_class: steer.corpus.per_class,
        heads: model.config().total_heads(),
        head_dim: model.config().head_dim,
        planted_head: model.planted_spec().map(|s| s.head),
    };
    info!(rows = summary.rows, "activations collected");
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    /// `accuracy_grid[layer][head]`, validation accuracy.
    pub accuracy_grid: Vec<Vec<f64>>,
    /// Heads by descending validation accuracy.
    pub ranking: Vec<HeadId>,
    pub report: ProbeReport,
}

pub fn probe(config: ProbeConfig, out: &Path) -> Result<ProbeTable> {
    let ds = ActivationDataset::load(&artifact(out, ACTIVATIONS, "collect")?)?;
    let report = train_probes(&ds, &config)?;
    let ranking = select_top_heads(&report.results, report.results.len())?;
    let table = ProbeTable { accuracy_grid: report.accuracy_grid(), ranking, report };
    write_json(&out.join(PROBES), &table)?;
    Ok(table)
}

/// Directions for the `k` best-probed heads.
pub fn plan(out: &Path, k: usize, alpha: f64, sign: Sign) -> Result<InterventionPlan> {
    let table: ProbeTable = read_json(&artifact(out, PROBES, "probe")?)?;
    let ds = ActivationDataset::load(&artifact(out, ACTIVATIONS, "collect")?)?;
    let heads = select_top_heads(&table.report.results, k)?;
    let directions = heads.iter().map(|&h| steering_direction(&ds, h)).collect::<Result<Vec<_>, _>>()?;
    let plan = InterventionPlan::new(directions, alpha, sign)?;
    plan.save(&out.join(PLAN))?;
    Ok(plan)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Overrides the config's `intervene_on_prompt`.
    pub intervene_on_prompt: Option<bool>,
    pub impute: Impute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFile {
    pub format: String,
    pub languages: Vec<String>,
    pub paraphrase_ids: Vec<usize>,
    pub generation_params_id: String,
    pub impute: Impute,
    pub intervene_on_prompt: bool,
    pub baseline: EvalCell,
    pub sweep: Vec<EvalCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    /// `None` for the unsteered baseline.
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub sign: Option<Sign>,
    pub results: ModelResults,
    pub useless: Vec<UselessCell>,
}

/// Unknown answers per paraphrase run for one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UselessCell {
    pub language: String,
    pub mean: f64,
    pub std: f64,
    pub total: usize,
}

/// Baseline and steered surveys for every (K, alpha, sign) of the sweep.
pub fn eval(cfg: &Loaded, out: &Path, opts: &EvalOptions) -> Result<EvalFile> {
    let steer = cfg.steer()?;
    let model = Arc::new(Model::load(&artifact(out, MODEL, "collect")?)?);
    let base_plan = InterventionPlan::load(&artifact(out, PLAN, "plan")?)?;
    let languages = steer.languages.clone().unwrap_or_else(|| cfg.config.experiment.languages.clone());
    let params = match &steer.params {
        Some(p) => p.params(),
        None => ParamsPreset::Intervention.params(),
    };
    params.validate()?;
    let on_prompt = opts.intervene_on_prompt.unwrap_or(steer.intervene_on_prompt);
    let ks = if steer.sweep.k.is_empty() { vec![base_plan.k()] } else { steer.sweep.k.clone() };

    let survey = |plans: Vec<InterventionPlan>| -> Result<(ModelResults, Vec<UselessCell>)> {
        let mut backend = ToyBackend::new(TOY_ID, Arc::clone(&model), plans, Readout::Dialect)?
            .with_intervene_on_prompt(on_prompt);
        if let Some(n) = steer.max_new_tokens {
            backend = backend.with_max_new_tokens(n);
        }
        let task = SurveyTask {
            questionnaire: &cfg.questionnaire,
            templates: &cfg.templates,
            languages: &languages,
            params: &params,
            labels: &cfg.labels,
        };
        let mut records: Vec<ResponseRecord> = Vec::new();
        let opts_s = SurveyOptions { fixed_timestamp: Some(EPOCH.to_string()) };
        run_survey_with(&backend, &task, &opts_s, &mut |r| {
            records.push(r);
            Ok(())
        })?;
        let backends = [(TOY_ID.to_string(), "toy-model".to_string())];
        let mut results = summarize(&records, &cfg.questionnaire, opts.impute, &backends, &languages)?;
        let useless = compliance_table(&records)
            .into_iter()
            .map(|c| UselessCell { language: c.language, mean: c.mean_unknowns, std: c.std_unknowns, total: c.total_unknowns })
            .collect();
        Ok((results.remove(0), useless))
    };

    info!("surveying baseline");
    let (results, useless) = survey(Vec::new())?;
    let baseline = EvalCell { k: None, alpha: None, sign: None, results, useless };
    let mut sweep = Vec::new();
    for &k in &ks {
        let truncated = base_plan.truncated(k).map_err(|e| {
            CliError::Usage(format!("sweep K = {k} exceeds the plan's {} heads ({e})", base_plan.k()))
        })?;
        for &alpha in &steer.sweep.alpha {
            for &sign in &steer.sweep.sign {
                info!(k, alpha, %sign, "surveying steered model");
                let plan = truncated.with_alpha(alpha)?.with_sign(sign);
                let (results, useless) = survey(vec![plan])?;
                sweep.push(EvalCell { k: Some(k), alpha: Some(alpha), sign: Some(sign), results, useless });
            }
        }
    }
    let file = EvalFile {
        format: "compass-steer-eval/1".into(),
        languages,
        paraphrase_ids: cfg.templates.templates.iter().map(|t| t.id).collect(),
        generation_params_id: params.id(),
        impute: opts.impute,
        intervene_on_prompt: on_prompt,
        baseline,
        sweep,
    };
    write_json(&out.join(EVAL), &file)?;
    write(&out.join(EVAL_REPORT), eval_report(&file))?;
    Ok(file)
}

fn useless_entry(cell: &EvalCell, lang: &str) -> String {
    match cell.useless.iter().find(|u| u.language == lang) {
        Some(u) if u.std == 0.0 => format!("{:.1}", u.mean),
        Some(u) => format!("{:.1}±{:.1}", u.mean, u.std),
        None => "-".into(),
    }
}

/// Text tables: useless-response counts by configuration, then compass shifts.
pub fn eval_report(file: &EvalFile) -> String {
    let mut s = String::new();
    let signs: Vec<Sign> = {
        let mut v: Vec<Sign> = file.sweep.iter().filter_map(|c| c.sign).collect();
        v.sort_by_key(|&s| i8::from(s));
        v.dedup();
        v
    };
    let mut rows: BTreeMap<(usize, u64), BTreeMap<(String, i8), String>> = BTreeMap::new();
    for c in &file.sweep {
        let (Some(k), Some(alpha), Some(sign)) = (c.k, c.alpha, c.sign) else { continue };
        let row = rows.entry((k, alpha.to_bits())).or_default();
        for lang in &file.languages {
            row.insert((lang.clone(), i8::from(sign)), useless_entry(c, lang));
        }
    }
    let _ = writeln!(s, "Average useless response counts by intervention configuration");
    let mut header = vec!["config".to_string()];
    for lang in &file.languages {
        for sign in &signs {
            header.push(format!("{} {sign}", lang.to_uppercase()));
        }
    }
    let mut table = vec![header];
    let mut base = vec!["base".to_string()];
    for lang in &file.languages {
        for _ in &signs {
            base.push(useless_entry(&file.baseline, lang));
        }
    }
    table.push(base);
    let mut keys: Vec<(usize, u64)> = rows.keys().copied().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))));
    for key in keys {
        let row = &rows[&key];
        let mut line = vec![format!("K={} alpha={}", key.0, f64::from_bits(key.1))];
        for lang in &file.languages {
            for sign in &signs {
                line.push(row.get(&(lang.clone(), i8::from(*sign))).cloned().unwrap_or_else(|| "-".into()));
            }
        }
        table.push(line);
    }
    render_table(&mut s, &table);

    let _ = writeln!(s, "\nCompass points (economic, social), mean across paraphrases");
    let mut table = vec![vec!["config".to_string(), "language".into(), "point".into(), "shift vs base".into()]];
    let cells = std::iter::once(&file.baseline).chain(&file.sweep);
    for c in cells {
        let label = match (c.k, c.alpha, c.sign) {
            (Some(k), Some(a), Some(sg)) => format!("K={k} alpha={a} sign={sg}"),
            _ => "base".into(),
        };
        for lang in &file.languages {
            let point = c.results.language(lang).and_then(|l| l.aggregate).map(|a| a.mean);
            let base = file.baseline.results.language(lang).and_then(|l| l.aggregate).map(|a| a.mean);
            let (p, d) = match (point, base) {
                (Some(p), Some(b)) => (
                    format!("({:.3}, {:.3})", p.economic, p.social),
                    format!("({:+.3}, {:+.3})", p.economic - b.economic, p.social - b.social),
                ),
                (Some(p), None) => (format!("({:.3}, {:.3})", p.economic, p.social), "-".into()),
                _ => ("-".into(), "-".into()),
            };
            table.push(vec![label.clone(), lang.to_uppercase(), p, d]);
        }
    }
    render_table(&mut s, &table);
    s
}

fn render_table(s: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|i| rows.iter().filter_map(|r| r.get(i)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    for r in rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        let _ = writeln!(s, "{}", cells.join("  ").trim_end());
    }
}
