use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use careerpath::rng::child_seed;
use careerpath_cli::artifacts::{write_atomic, Manifest};
use careerpath_cli::pipeline::{build_env, PipelineError};
use careerpath_cli::recommend::{load_history, recommend, summary, write_recommendation_csv};
use careerpath_cli::{ExperimentConfig, Workspace};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "careerpath", version, about = "Career path recommendation experiments on a simulated labour market")]
struct Cli {
    /// TOML experiment config; defaults are used for anything not given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic market into <output>/data.
    GenerateData,
    /// Fit the transition and salary models.
    FitModels,
    /// Train the configured algorithm.
    Train,
    /// Compare the trained policy with the observed careers.
    Evaluate,
    /// Tabulate start and final jobs of simulated episodes.
    DistributionReport,
    /// Recommend a career path for one work history.
    Recommend {
        /// Work-experience CSV for a single employee.
        #[arg(long)]
        history: PathBuf,
        /// Number of steps to plan; defaults to the environment horizon.
        #[arg(long)]
        horizon: Option<u32>,
        /// Where to write the CSV trace; defaults to <output>/recommendation.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage from data generation to the distribution report.
    Pipeline,
    /// Check every artifact against the manifest hashes.
    Verify,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(dir) = &cli.output {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let dir = config.output_dir.clone();
    let ws = Workspace::new(&config, &dir)?;
    match &cli.command {
        Command::GenerateData => ws.generate_data()?,
        Command::FitModels => ws.fit_models()?,
        Command::Train => ws.train()?,
        Command::Evaluate => {
            let report = ws.evaluate()?;
            if !cli.quiet {
                println!("{}", serde_json::to_string_pretty(&report).expect("serialisable report"));
            }
        }
        Command::DistributionReport => {
            ws.distribution_report()?;
        }
        Command::Recommend { history, horizon, out } => {
            let models = ws.load_models()?;
            let trained = ws.load_policy()?;
            let env = build_env(&config.env, &models);
            let history = load_history(history)?;
            let horizon = horizon.unwrap_or(config.env.horizon_steps);
            let seed = child_seed(config.seeds().eval, "recommend");
            let rec = recommend(&*trained.as_policy(), &env, history, horizon, seed)?;
            let mut csv = Vec::new();
            write_recommendation_csv(&mut csv, &rec)?;
            let path = out.clone().unwrap_or_else(|| dir.join("recommendation.csv"));
            write_atomic(&path, &csv)?;
            if !cli.quiet {
                print!("{}", summary(&rec));
                println!("Trace written to {}", path.display());
            }
        }
        Command::Pipeline => {
            let report = ws.run_all()?;
            if !cli.quiet {
                println!(
                    "{}: change {:+.2}% (p = {:.4}); artifacts in {}",
                    trained_label(&config),
                    report.change_pct,
                    report.p_value,
                    dir.display()
                );
            }
        }
        Command::Verify => {
            let manifest = Manifest::load_or_default(&dir)?;
            if manifest.files.is_empty() {
                return Err(PipelineError::Input(format!("{}: no manifest entries", dir.display())));
            }
            let problems = manifest.verify(&dir)?;
            if !problems.is_empty() {
                let lines: Vec<String> = problems.iter().map(ToString::to_string).collect();
                return Err(PipelineError::Input(lines.join("\n")));
            }
            if !cli.quiet {
                println!("{} artifacts verified", manifest.files.len());
            }
        }
    }
    Ok(())
}

fn trained_label(config: &ExperimentConfig) -> &'static str {
    config.algorithm.label()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
