//! The experiment stages, both in memory and against an output directory.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use careerpath::agents::{
    a2c_train, dqn_train, q_learning_train_from, sarsa_train_from, A2cPolicy, AgentError, DqnPolicy,
    GreedyHighestExpectedReward, GreedyMostCommon,
};
use careerpath::env::{EnvError, LearnedDynamics};
use careerpath::eval::{
    compare_policies, distribution_report, observed_paths, write_reports_csv, DistributionReport, EvalError,
    StartDistribution, DEFAULT_TOP_JOBS,
};
use careerpath::market::{
    generate_synthetic, load_dataset, plausible_jobs, preprocess, write_dataset, MarketError, APPLICATIONS_FILE,
    VACANCIES_FILE, WORK_EXPERIENCE_FILE,
};
use careerpath::models::ModelError;
use careerpath::rng::child_seed;
use careerpath::{
    Algorithm, ComparisonReport, Env, EnvConfig, JobId, MarketDataset, ObservedPath, Policy, QTable, SalaryModel,
    StateRepresentation, TransitionModel,
};
use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::{read_document, sha256_file, write_atomic, write_document, ArtifactError, Manifest};
use crate::config::{ConfigError, ExperimentConfig};

pub const DATA_DIR: &str = "data";
pub const CONFIG_FILE: &str = "config.toml";
pub const TRANSITION_FILE: &str = "models/transition.json";
pub const SALARY_FILE: &str = "models/salary.json";
pub const POLICY_FILE: &str = "policy/policy.json";
pub const COMPARISON_JSON: &str = "reports/comparison.json";
pub const COMPARISON_CSV: &str = "reports/comparison.csv";
pub const DISTRIBUTION_UNIFORM_CSV: &str = "reports/distribution_uniform.csv";
pub const DISTRIBUTION_EMPIRICAL_CSV: &str = "reports/distribution_empirical.csv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("market data: {0}")]
    Market(#[from] MarketError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("training: {0}")]
    Agent(#[from] AgentError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    /// 1 for bad configuration or input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Input(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// A trained policy in its persisted form. Tables and networks keep their
/// shapes next to flat parameter arrays; the greedy baselines have no
/// parameters and are rebuilt from the fitted models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum TrainedPolicy {
    Sarsa { table: QTable },
    Qlearning { table: QTable },
    Dqn { policy: DqnPolicy },
    A2c { policy: A2cPolicy },
    GreedyCommon,
    GreedyHer,
}

impl TrainedPolicy {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedPolicy::Sarsa { .. } => Algorithm::Sarsa,
            TrainedPolicy::Qlearning { .. } => Algorithm::Qlearning,
            TrainedPolicy::Dqn { .. } => Algorithm::Dqn,
            TrainedPolicy::A2c { .. } => Algorithm::A2c,
            TrainedPolicy::GreedyCommon => Algorithm::GreedyCommon,
            TrainedPolicy::GreedyHer => Algorithm::GreedyHer,
        }
    }

    pub fn as_policy(&self) -> Box<dyn Policy + '_> {
        match self {
            TrainedPolicy::Sarsa { table } | TrainedPolicy::Qlearning { table } => Box::new(table),
            TrainedPolicy::Dqn { policy } => Box::new(policy),
            TrainedPolicy::A2c { policy } => Box::new(policy),
            TrainedPolicy::GreedyCommon => Box::new(GreedyMostCommon::new()),
            TrainedPolicy::GreedyHer => Box::new(GreedyHighestExpectedReward::new()),
        }
    }
}

/// Cleaned data and the job catalog drawn from it.
#[derive(Clone, Debug)]
pub struct PreparedMarket {
    pub dataset: MarketDataset,
    pub catalog: Vec<JobId>,
}

pub fn prepare_market(raw: &MarketDataset, n_plausible_jobs: usize) -> PreparedMarket {
    let dataset = preprocess(raw);
    let catalog = plausible_jobs(&dataset, n_plausible_jobs).jobs;
    PreparedMarket { dataset, catalog }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub transition: TransitionModel,
    pub salary: SalaryModel,
}

pub fn fit_models(
    config: &ExperimentConfig,
    market: &PreparedMarket,
    representation: StateRepresentation,
) -> Result<FittedModels> {
    let (transition, set) = TransitionModel::fit(
        &market.dataset,
        &market.catalog,
        representation,
        &config.seeded_transition_forest(),
    )?;
    info!(
        "transition model: {} applications, {} catalog jobs",
        set.rows.len(),
        market.catalog.len()
    );
    let salary = SalaryModel::fit(&market.dataset.vacancies, &market.catalog, &config.seeded_salary_forest())?;
    Ok(FittedModels { transition, salary })
}

pub fn build_env(env_config: &EnvConfig, models: &FittedModels) -> Env {
    let dynamics = LearnedDynamics::new(Arc::new(models.transition.clone()), &models.salary);
    Env::new(env_config.clone(), Arc::new(dynamics))
}

/// Catalog indices of the observed paths' first jobs, in path order.
pub fn training_starts(env: &Env, paths: &[ObservedPath]) -> Vec<usize> {
    paths.iter().filter_map(|p| env.job_index(p.start_job)).collect()
}

pub fn train_policy(
    config: &ExperimentConfig,
    env: &Env,
    algorithm: Algorithm,
    starts: &[usize],
) -> Result<TrainedPolicy> {
    let seed = child_seed(config.seeds().train, algorithm.label());
    let t = &config.train;
    Ok(match algorithm {
        Algorithm::Sarsa => TrainedPolicy::Sarsa {
            table: sarsa_train_from(env, &careerpath::agents::TrainConfig { seed, ..t.tabular.clone() }, starts)?,
        },
        Algorithm::Qlearning => TrainedPolicy::Qlearning {
            table: q_learning_train_from(env, &careerpath::agents::TrainConfig { seed, ..t.tabular.clone() }, starts)?,
        },
        Algorithm::Dqn => {
            let (policy, stats) = dqn_train(env, &careerpath::agents::DqnConfig { seed, ..t.dqn.clone() }, starts)?;
            info!("dqn: {} updates, {} target syncs", stats.updates, stats.target_syncs);
            TrainedPolicy::Dqn { policy }
        }
        Algorithm::A2c => {
            let (policy, stats) = a2c_train(env, &careerpath::agents::A2cConfig { seed, ..t.a2c.clone() }, starts)?;
            info!("a2c: {} updates", stats.updates);
            TrainedPolicy::A2c { policy }
        }
        Algorithm::GreedyCommon => TrainedPolicy::GreedyCommon,
        Algorithm::GreedyHer => TrainedPolicy::GreedyHer,
    })
}

pub fn evaluate_policy(
    config: &ExperimentConfig,
    env: &Env,
    policy: &TrainedPolicy,
    paths: &[ObservedPath],
) -> Result<ComparisonReport> {
    let (report, _) = compare_policies(&*policy.as_policy(), env, paths, &config.seeded_eval())?;
    Ok(report)
}

/// Final-state distributions from uniform and from observed start jobs.
pub fn distribution_reports(
    config: &ExperimentConfig,
    env: &Env,
    policy: &TrainedPolicy,
    paths: &[ObservedPath],
) -> (DistributionReport, DistributionReport) {
    let seed = child_seed(config.seeds().eval, "distribution");
    let p = policy.as_policy();
    let n = config.eval.n_episodes_distribution;
    let uniform = distribution_report(&*p, env, &StartDistribution::Uniform, n, child_seed(seed, "uniform"));
    let starts = StartDistribution::Empirical(paths.iter().map(|p| p.start_job).collect());
    let empirical = distribution_report(&*p, env, &starts, n, child_seed(seed, "empirical"));
    (uniform, empirical)
}

/// Runs stages against an output directory. Each stage reads its inputs
/// from earlier stages' artifacts, so any suffix of the pipeline can be
/// re-run on its own.
pub struct Workspace<'a> {
    pub config: &'a ExperimentConfig,
    pub dir: &'a Path,
}

impl<'a> Workspace<'a> {
    pub fn new(config: &'a ExperimentConfig, dir: &'a Path) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, dir })
    }

    fn finish(&self, files: &[&str]) -> Result<()> {
        let mut manifest = Manifest::load_or_default(self.dir)?;
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_owned();
        manifest.master_seed = self.config.master_seed;
        manifest.seeds = Some(self.config.seeds());
        write_atomic(&self.dir.join(CONFIG_FILE), self.config.to_toml_string().as_bytes())?;
        manifest.config_sha256 = sha256_file(&self.dir.join(CONFIG_FILE))?;
        for f in files {
            manifest.record(self.dir, f)?;
        }
        manifest.save(self.dir)?;
        Ok(())
    }

    fn load_raw(&self) -> Result<MarketDataset> {
        let data = self.dir.join(DATA_DIR);
        if !data.join(WORK_EXPERIENCE_FILE).exists() {
            return Err(ArtifactError::Missing {
                path: data.join(WORK_EXPERIENCE_FILE).display().to_string(),
                stage: "generate-data",
            }
            .into());
        }
        Ok(load_dataset(&data)?)
    }

    fn load_market(&self) -> Result<PreparedMarket> {
        Ok(prepare_market(&self.load_raw()?, self.config.n_plausible_jobs))
    }

    pub fn load_models(&self) -> Result<FittedModels> {
        let transition: TransitionModel =
            read_document(&self.dir.join(TRANSITION_FILE), "transition_model", "fit-models")?;
        let salary: SalaryModel = read_document(&self.dir.join(SALARY_FILE), "salary_model", "fit-models")?;
        if transition.representation() != self.config.representation {
            return Err(PipelineError::Input(format!(
                "fitted transition model uses {:?} but the config asks for {:?}; re-run fit-models",
                transition.representation(),
                self.config.representation
            )));
        }
        Ok(FittedModels { transition, salary })
    }

    pub fn load_policy(&self) -> Result<TrainedPolicy> {
        Ok(read_document(&self.dir.join(POLICY_FILE), "policy", "train")?)
    }

    pub fn generate_data(&self) -> Result<()> {
        let raw = generate_synthetic(&self.config.seeded_synth())?;
        info!(
            "generated {} work-experience records, {} vacancies, {} applications",
            raw.experiences.len(),
            raw.vacancies.len(),
            raw.applications.len()
        );
        let data = self.dir.join(DATA_DIR);
        fs::create_dir_all(&data).map_err(|source| ArtifactError::Io {
            path: data.display().to_string(),
            source,
        })?;
        write_dataset(&data, &raw)?;
        let files: Vec<String> = [WORK_EXPERIENCE_FILE, VACANCIES_FILE, APPLICATIONS_FILE]
            .iter()
            .map(|f| format!("{DATA_DIR}/{f}"))
            .collect();
        self.finish(&files.iter().map(String::as_str).collect::<Vec<_>>())
    }

    pub fn fit_models(&self) -> Result<()> {
        let market = self.load_market()?;
        let models = fit_models(self.config, &market, self.config.representation)?;
        write_document(&self.dir.join(TRANSITION_FILE), "transition_model", &models.transition)?;
        write_document(&self.dir.join(SALARY_FILE), "salary_model", &models.salary)?;
        self.finish(&[TRANSITION_FILE, SALARY_FILE])
    }

    fn env_and_paths(&self) -> Result<(Env, Vec<ObservedPath>)> {
        let market = self.load_market()?;
        let models = self.load_models()?;
        let env = build_env(&self.config.env, &models);
        let paths = observed_paths(&market.dataset, &models.salary);
        Ok((env, paths))
    }

    pub fn train(&self) -> Result<()> {
        let (env, paths) = self.env_and_paths()?;
        let starts = training_starts(&env, &paths);
        let policy = train_policy(self.config, &env, self.config.algorithm, &starts)?;
        write_document(&self.dir.join(POLICY_FILE), "policy", &policy)?;
        self.finish(&[POLICY_FILE])
    }

    pub fn evaluate(&self) -> Result<ComparisonReport> {
        let (env, paths) = self.env_and_paths()?;
        let policy = self.load_policy()?;
        let report = evaluate_policy(self.config, &env, &policy, &paths)?;
        info!(
            "{}: change {:+.2}% (p = {:.4}) over {} paths",
            policy.algorithm().label(),
            report.change_pct,
            report.p_value,
            report.n_paths
        );
        write_document(&self.dir.join(COMPARISON_JSON), "comparison_report", &report)?;
        let mut csv = Vec::new();
        write_reports_csv(&mut csv, &[(policy.algorithm().label(), &report)])?;
        write_atomic(&self.dir.join(COMPARISON_CSV), &csv)?;
        self.finish(&[COMPARISON_JSON, COMPARISON_CSV])?;
        Ok(report)
    }

    pub fn distribution_report(&self) -> Result<(DistributionReport, DistributionReport)> {
        let (env, paths) = self.env_and_paths()?;
        let policy = self.load_policy()?;
        let (uniform, empirical) = distribution_reports(self.config, &env, &policy, &paths);
        for (file, report) in [(DISTRIBUTION_UNIFORM_CSV, &uniform), (DISTRIBUTION_EMPIRICAL_CSV, &empirical)] {
            let mut csv = Vec::new();
            report.write_csv(&mut csv, DEFAULT_TOP_JOBS)?;
            write_atomic(&self.dir.join(file), &csv)?;
        }
        self.finish(&[DISTRIBUTION_UNIFORM_CSV, DISTRIBUTION_EMPIRICAL_CSV])?;
        Ok((uniform, empirical))
    }

    pub fn run_all(&self) -> Result<ComparisonReport> {
        self.generate_data()?;
        self.fit_models()?;
        self.train()?;
        let report = self.evaluate()?;
        self.distribution_report()?;
        Ok(report)
    }
}
