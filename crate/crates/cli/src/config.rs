use std::path::{Path, PathBuf};

use careerpath::agents::{A2cConfig, DqnConfig, TabularKey, TrainConfig};
use careerpath::eval::EvalConfig;
use careerpath::forest::{FeaturesPerSplit, ForestParams};
use careerpath::market::DEFAULT_PLAUSIBLE_JOBS;
use careerpath::rng::child_seed;
use careerpath::{Algorithm, EnvConfig, StateRepresentation, SynthConfig};
use serde::de::{DeserializeOwned, Deserializer, Error as _};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_owned(),
        message: message.to_string(),
    }
}

/// Reads a partial table on top of `base`, so that fields left out keep the
/// pipeline's value rather than the type's own default.
fn overlay<'de, D, T>(deserializer: D, base: T) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: Serialize + DeserializeOwned,
{
    let patch = toml::Table::deserialize(deserializer)?;
    let mut merged = toml::Table::try_from(&base).map_err(D::Error::custom)?;
    merged.extend(patch);
    toml::Value::Table(merged).try_into().map_err(D::Error::custom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    #[serde(deserialize_with = "transition_forest")]
    pub transition: ForestParams,
    #[serde(deserialize_with = "salary_forest")]
    pub salary: ForestParams,
}

fn transition_forest<'de, D: Deserializer<'de>>(d: D) -> Result<ForestParams, D::Error> {
    overlay(d, ForestSection::default().transition)
}

fn salary_forest<'de, D: Deserializer<'de>>(d: D) -> Result<ForestParams, D::Error> {
    overlay(d, ForestSection::default().salary)
}

impl Default for ForestSection {
    fn default() -> Self {
        Self {
            // Large leaves keep hire estimates for rarely observed job pairs
            // close to their pooled rate instead of chasing a handful of
            // outcomes; with only six features every split may consider all.
            transition: ForestParams {
                min_samples_leaf: 100,
                features_per_split: FeaturesPerSplit::All,
                ..ForestParams::default()
            },
            // Salary targets are continuous and plentiful; fully grown trees
            // reproduce per-job means.
            salary: ForestParams {
                n_trees: 50,
                max_depth: None,
                ..ForestParams::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    #[serde(deserialize_with = "tabular_train")]
    pub tabular: TrainConfig,
    pub dqn: DqnConfig,
    pub a2c: A2cConfig,
}

fn tabular_train<'de, D: Deserializer<'de>>(d: D) -> Result<TrainConfig, D::Error> {
    overlay(d, TrainSection::default().tabular)
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            // The horizon is finite and undiscounted, so the table is keyed
            // by step as well as job, and per-entry step sizes decay with
            // visits so that rarely tried applications still converge.
            tabular: TrainConfig {
                episodes: 1_000_000,
                alpha: 1.0,
                alpha_visit_exponent: Some(0.5),
                key: TabularKey::JobAndStep,
                ..TrainConfig::default()
            },
            dqn: DqnConfig::default(),
            a2c: A2cConfig::default(),
        }
    }
}

/// A complete experiment. Every section has defaults, so an empty file is a
/// valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub algorithm: Algorithm,
    pub representation: StateRepresentation,
    /// Size of the job catalog (most prevalent occupation-industry pairs).
    pub n_plausible_jobs: usize,
    pub synth: SynthConfig,
    pub forest: ForestSection,
    pub env: EnvConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            output_dir: PathBuf::from("careerpath-out"),
            algorithm: Algorithm::Qlearning,
            representation: StateRepresentation::LastJob,
            n_plausible_jobs: DEFAULT_PLAUSIBLE_JOBS,
            synth: SynthConfig::default(),
            forest: ForestSection::default(),
            env: EnvConfig::default(),
            train: TrainSection::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Seeds of the named random streams, all derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStreams {
    pub synth: u64,
    pub fit_transition: u64,
    pub fit_salary: u64,
    pub train: u64,
    pub eval: u64,
}

impl SeedStreams {
    pub fn from_master(master: u64) -> Self {
        Self {
            synth: child_seed(master, "synth"),
            fit_transition: child_seed(master, "fit.transition"),
            fit_salary: child_seed(master, "fit.salary"),
            train: child_seed(master, "train"),
            eval: child_seed(master, "eval"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn seeds(&self) -> SeedStreams {
        SeedStreams::from_master(self.master_seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.algorithm.is_tabular() && self.representation == StateRepresentation::FullHistory {
            return Err(invalid(
                "algorithm",
                format!(
                    "{} is tabular and needs representation = \"last_job\"",
                    self.algorithm.label()
                ),
            ));
        }
        if self.n_plausible_jobs == 0 {
            return Err(invalid("n_plausible_jobs", "must be positive"));
        }
        self.synth.validate().map_err(|e| invalid("synth", e))?;
        self.forest
            .transition
            .validate()
            .map_err(|e| invalid("forest.transition", e))?;
        self.forest.salary.validate().map_err(|e| invalid("forest.salary", e))?;
        self.env.validate().map_err(|e| invalid("env", e))?;
        self.train.tabular.validate().map_err(|e| invalid("train.tabular", e))?;
        self.train.dqn.validate().map_err(|e| invalid("train.dqn", e))?;
        self.train.a2c.validate().map_err(|e| invalid("train.a2c", e))?;
        for (field, v) in [
            ("eval.n_sample", self.eval.n_sample),
            ("eval.n_permutations", self.eval.n_permutations),
            ("eval.n_episodes_distribution", self.eval.n_episodes_distribution),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        Ok(())
    }

    /// Sub-configs with their derived seeds filled in.
    pub fn seeded_synth(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seeds().synth,
            ..self.synth.clone()
        }
    }

    pub fn seeded_transition_forest(&self) -> ForestParams {
        ForestParams {
            seed: self.seeds().fit_transition,
            ..self.forest.transition.clone()
        }
    }

    pub fn seeded_salary_forest(&self) -> ForestParams {
        ForestParams {
            seed: self.seeds().fit_salary,
            ..self.forest.salary.clone()
        }
    }

    pub fn seeded_eval(&self) -> EvalConfig {
        EvalConfig {
            seed: self.seeds().eval,
            ..self.eval.clone()
        }
    }
}
