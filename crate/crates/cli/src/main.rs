use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use compass_cli::analyze::cmd_analyze;
use compass_cli::config;
use compass_cli::error::{read_json, write_json};
use compass_cli::run::{cmd_run, RunOptions};
use compass_cli::rundir::load_run;
use compass_cli::score::{cmd_score, ResultsFile};
use compass_cli::steer::{self, EvalOptions};
use compass_cli::{CliError, Result};
use compass_core::harness::Impute;
use compass_core::questionnaire::Questionnaire;
use compass_core::stats::DEFAULT_ALPHA;
use compass_core::steering::{ProbeConfig, Sign};

#[derive(Parser)]
#[command(name = "compass", version, about = "Political compass surveys, reports and head steering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survey every configured backend and language into a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fixed timestamps and a config-derived run id.
        #[arg(long)]
        reproducible: bool,
        #[arg(long, hide = true)]
        fail_after: Option<usize>,
    },
    /// Score a complete run into per-language compass points.
    Score {
        run_dir: PathBuf,
        /// Supplies a non-canonical questionnaire.
        #[arg(long)]
        config: Option<PathBuf>,
        /// skip, fallback, or a choice such as disagree.
        #[arg(long, default_value = "skip")]
        impute: Impute,
        /// Defaults to <run_dir>/results.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kruskal-Wallis and pairwise tests, text report and SVG plots.
    Analyze {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        significance: f64,
    },
    /// Steering pipeline on the toy transformer.
    Steer {
        #[command(subcommand)]
        command: SteerCommand,
    },
}

#[derive(Subcommand)]
enum SteerCommand {
    /// Build the model and record per-head activations on the labeled corpus.
    Collect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one probe per head.
    Probe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write an intervention plan for the top-K heads.
    Plan {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<Sign>,
    },
    /// Survey the baseline and every (K, alpha, sign) of the sweep.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        intervene_on_prompt: bool,
        #[arg(long, default_value = "skip")]
        impute: Impute,
        /// Accepted for symmetry with `run`; eval output carries no timestamps.
        #[arg(long)]
        reproducible: bool,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, reproducible, fail_after } => {
            let cfg = config::load(&config)?;
            let m = cmd_run(&cfg, &out, &RunOptions { reproducible, fail_after })?;
            println!("run {} complete: {} log files in {}", m.run_id, m.files.len(), out.display());
        }
        Command::Score { run_dir, config, impute, out } => {
            let q = match config {
                Some(path) => config::load(&path)?.questionnaire,
                None => Questionnaire::canonical()?,
            };
            let run = load_run(&run_dir)?;
            let results = cmd_score(&run, &q, impute)?;
            let out = out.unwrap_or_else(|| run_dir.join("results.json"));
            write_json(&out, &results)?;
            println!("scored {} models into {}", results.models.len(), out.display());
        }
        Command::Analyze { results, out, significance } => {
            if !(significance > 0.0 && significance < 1.0) {
                return Err(CliError::Usage(format!("significance {significance} must lie in (0, 1)")));
            }
            let files = results.iter().map(|p| read_json::<ResultsFile>(p)).collect::<Result<Vec<_>>>()?;
            let output = cmd_analyze(&files, &out, significance)?;
            print!("{}", output.report);
        }
        Command::Steer { command } => steer_command(command)?,
    }
    Ok(())
}

fn probe_config(path: Option<&PathBuf>) -> Result<(ProbeConfig, Option<config::Loaded>)> {
    match path {
        Some(p) => {
            let cfg = config::load(p)?;
            Ok((cfg.steer()?.probe, Some(cfg)))
        }
        None => Ok((ProbeConfig::default(), None)),
    }
}

fn steer_command(command: SteerCommand) -> Result<()> {
    match command {
        SteerCommand::Collect { config, out } => {
            let s = steer::collect(&config::load(&config)?, &out)?;
            println!("collected {} rows x {} heads into {}", s.rows, s.heads, out.display());
        }
        SteerCommand::Probe { config, out } => {
            let (probe, _) = probe_config(config.as_ref())?;
            let table = steer::probe(probe, &out)?;
            for (layer, row) in table.accuracy_grid.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|a| format!("{a:.3}")).collect();
                println!("layer {layer}: {}", cells.join(" "));
            }
            println!("best head: {}", table.ranking[0]);
        }
        SteerCommand::Plan { config, out, k, alpha, sign } => {
            let (_, cfg) = probe_config(config.as_ref())?;
            let s = cfg.as_ref().map(|c| c.steer()).transpose()?;
            let k = k.or(s.map(|s| s.k)).unwrap_or(1);
            let alpha = alpha.or(s.map(|s| s.alpha)).unwrap_or(5.0);
            let sign = sign.or(s.map(|s| s.sign)).unwrap_or(Sign::Positive);
            let plan = steer::plan(&out, k, alpha, sign)?;
            let heads: Vec<String> = plan.directions().iter().map(|d| d.head.to_string()).collect();
            println!("plan: K={k} alpha={alpha} sign={sign} heads {}", heads.join(" "));
        }
        SteerCommand::Eval { config, out, intervene_on_prompt, impute, reproducible: _ } => {
            let cfg = config::load(&config)?;
            let opts = EvalOptions { intervene_on_prompt: intervene_on_prompt.then_some(true), impute };
            let file = steer::eval(&cfg, &out, &opts)?;
            print!("{}", steer::eval_report(&file));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("COMPASS_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
