use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use benchforge::bridge::BridgeConfig;
use benchforge::harness::{evaluate_dir, EvalReport};
use benchforge::orchestrator::{load_manifest, run_pipeline, JudgeProvider, OrchestratorError, PipelineConfig, Stage};
use benchforge::package::validate_instance;
use benchforge::par::Exec;
use benchforge::scopes::AllowList;

#[derive(Debug, Parser)]
#[command(name = "benchforge", version, about = "Build and evaluate code-generation benchmark instances from Python repositories")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Uses the deterministic offline judge regardless of configuration.
    #[arg(long, global = true)]
    stub_judge: bool,
    /// Increases log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Acquires the corpus and writes the snapshot manifest.
    Ingest,
    /// Runs parsing, classification, structural filters, dedup and the judge.
    Filter,
    /// Additionally synthesizes suites and applies the coverage gate.
    Synthesize,
    /// Runs every stage and writes validated, dry-run-checked instances.
    Package,
    /// Scores candidate programs `<candidates>/<id>.py` against instances.
    Evaluate {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Directory for report.json and report.md.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Label recorded for every candidate in the report.
        #[arg(long, default_value = "candidate")]
        origin: String,
        #[arg(long)]
        sequential: bool,
    },
    /// Prints the funnel of a pipeline run as markdown.
    Report {
        /// Output root of a pipeline run.
        run: PathBuf,
    },
    /// Checks the layout and contents of one instance directory.
    ValidateInstance {
        dir: PathBuf,
        #[arg(long)]
        allow_list: Option<PathBuf>,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Stage(anyhow::Error),
}

fn load_config(cli: &Cli, stop: Stage) -> Result<PipelineConfig, Failure> {
    let path = cli.config.as_deref().ok_or_else(|| Failure::Usage(anyhow::anyhow!("--config is required for this command")))?;
    let mut c = PipelineConfig::load(path).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(s) = cli.seed {
        c.seed = Some(s);
    }
    if cli.stub_judge {
        c.judge.provider = JudgeProvider::Stub;
    }
    c.stages.stop_after = stop;
    Ok(c)
}

fn pipeline(cli: &Cli, stop: Stage) -> Result<(), Failure> {
    let config = load_config(cli, stop)?;
    match run_pipeline(&config) {
        Ok(run) => {
            println!("{}", run.manifest.funnel_markdown());
            println!("manifest: {}", config.output.join(benchforge::orchestrator::RUN_MANIFEST).display());
            Ok(())
        }
        Err(e @ OrchestratorError::Config(_)) => Err(Failure::Usage(e.into())),
        Err(e) => Err(Failure::Stage(e.into())),
    }
}

fn evaluate(instances: &Path, candidates: &Path, out: &Path, origin: &str, sequential: bool) -> anyhow::Result<EvalReport> {
    let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
    let report = evaluate_dir(instances, candidates, origin, &BridgeConfig::default(), exec)?;
    report.write(out)?;
    print!("{}", report.to_markdown());
    Ok(report)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest => pipeline(cli, Stage::Ingest),
        Command::Filter => pipeline(cli, Stage::Judge),
        Command::Synthesize => pipeline(cli, Stage::Synthesize),
        Command::Package => pipeline(cli, Stage::DryRun),
        Command::Evaluate {
            instances,
            candidates,
            out,
            origin,
            sequential,
        } => {
            let report = evaluate(instances, candidates, out, origin, *sequential).map_err(Failure::Stage)?;
            if !report.infrastructure_failures.is_empty() {
                return Err(Failure::Stage(anyhow::anyhow!(
                    "{} candidates could not be evaluated: {}",
                    report.infrastructure_failures.len(),
                    report.infrastructure_failures.join("; ")
                )));
            }
            Ok(())
        }
        Command::Report { run } => {
            let m = load_manifest(run).map_err(|e| Failure::Stage(e.into()))?;
            print!("{}", m.funnel_markdown());
            Ok(())
        }
        Command::ValidateInstance { dir, allow_list } => {
            let allow = match allow_list {
                Some(p) => AllowList::load(p).map_err(|e| Failure::Usage(e.into()))?,
                None => AllowList::default_list(),
            };
            let v = validate_instance(dir, &allow);
            let check = || -> anyhow::Result<()> {
                if !v.ok() {
                    bail!("{}", v.problems.join("\n"));
                }
                Ok(())
            };
            check().with_context(|| format!("{} is not a valid instance", dir.display())).map_err(Failure::Stage)?;
            println!("{}: ok", v.id.as_deref().unwrap_or("instance"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            eprintln!("run `benchforge --help` for the command contract");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
