use serde::{Deserialize, Serialize};

use super::{argmax_distribution, argmax_random_tie, draw_start, epsilon_greedy, AgentError, EpsilonSchedule, Policy};
use crate::env::{Env, State};
use crate::models::StateRepresentation;
use crate::rng::{rng_from_seed, SimRng};

/// What identifies a tabular state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularKey {
    /// The current job only.
    #[default]
    Job,
    /// The current job and the step index, for finite-horizon problems whose
    /// optimal policy depends on the time left.
    JobAndStep,
}

/// Dense action-value table. Unvisited entries read as exactly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    key: TabularKey,
    n_jobs: usize,
    horizon: u32,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(key: TabularKey, n_jobs: usize, horizon: u32) -> Self {
        let rows = match key {
            TabularKey::Job => n_jobs,
            TabularKey::JobAndStep => n_jobs * horizon.max(1) as usize,
        };
        Self {
            key,
            n_jobs,
            horizon,
            values: vec![0.0; rows * n_jobs],
        }
    }

    pub fn key(&self) -> TabularKey {
        self.key
    }

    pub fn n_jobs(&self) -> usize {
        self.n_jobs
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rebuilds a table from its dense values.
    pub fn from_values(key: TabularKey, n_jobs: usize, horizon: u32, values: Vec<f64>) -> Result<Self, AgentError> {
        let table = Self::new(key, n_jobs, horizon);
        if values.len() != table.values.len() {
            return Err(AgentError::InvalidConfig(format!(
                "q-table has {} values, expected {}",
                values.len(),
                table.values.len()
            )));
        }
        Ok(Self { values, ..table })
    }

    /// Row index for a (job, step) pair; steps past the horizon reuse the
    /// last step.
    pub fn row(&self, job: usize, t: u32) -> usize {
        match self.key {
            TabularKey::Job => job,
            TabularKey::JobAndStep => {
                let t = t.min(self.horizon.saturating_sub(1)) as usize;
                t * self.n_jobs + job
            }
        }
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_jobs..(row + 1) * self.n_jobs]
    }

    pub fn get(&self, job: usize, t: u32, action: usize) -> f64 {
        self.values[self.row(job, t) * self.n_jobs + action]
    }

    pub fn set(&mut self, job: usize, t: u32, action: usize, value: f64) {
        let r = self.row(job, t);
        self.values[r * self.n_jobs + action] = value;
    }

    pub fn state_values(&self, state: &State) -> &[f64] {
        self.row_values(self.row(state.current, state.t))
    }

    fn max_value(&self, row: usize) -> f64 {
        self.row_values(row).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Policy for QTable {
    fn name(&self) -> &str {
        "q-table"
    }

    fn action_distribution(&self, _env: &Env, state: &State) -> Vec<(usize, f64)> {
        argmax_distribution(self.state_values(state))
    }

    fn act(&self, _env: &Env, state: &State, rng: &mut SimRng) -> usize {
        argmax_random_tie(self.state_values(state), rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Step size. With `alpha_visit_exponent = Some(w)` the step size for a
    /// pair visited n times is `alpha * n^-w`.
    pub alpha: f64,
    pub alpha_visit_exponent: Option<f64>,
    pub epsilon: EpsilonSchedule,
    pub key: TabularKey,
    /// Supplied by the caller at run time; not part of the serialised form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            alpha: 0.1,
            alpha_visit_exponent: None,
            epsilon: EpsilonSchedule::default(),
            key: TabularKey::Job,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.episodes == 0 {
            return Err(AgentError::InvalidConfig("episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(AgentError::InvalidConfig("alpha must lie in [0,1]".into()));
        }
        if let Some(w) = self.alpha_visit_exponent {
            if !(0.0..=1.0).contains(&w) {
                return Err(AgentError::InvalidConfig("alpha_visit_exponent must lie in [0,1]".into()));
            }
        }
        self.epsilon.validate()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Target {
    Sarsa,
    QLearning,
}

pub fn sarsa_train(env: &Env, config: &TrainConfig) -> Result<QTable, AgentError> {
    train(env, config, &[], Target::Sarsa)
}

pub fn q_learning_train(env: &Env, config: &TrainConfig) -> Result<QTable, AgentError> {
    train(env, config, &[], Target::QLearning)
}

/// Sarsa with episodes starting from jobs drawn uniformly from `starts`
/// (catalog indices; the whole catalog when empty).
pub fn sarsa_train_from(env: &Env, config: &TrainConfig, starts: &[usize]) -> Result<QTable, AgentError> {
    train(env, config, starts, Target::Sarsa)
}

pub fn q_learning_train_from(env: &Env, config: &TrainConfig, starts: &[usize]) -> Result<QTable, AgentError> {
    train(env, config, starts, Target::QLearning)
}

fn train(env: &Env, config: &TrainConfig, starts: &[usize], target: Target) -> Result<QTable, AgentError> {
    config.validate()?;
    if env.representation() != StateRepresentation::LastJob {
        return Err(AgentError::FullHistoryTabular);
    }
    if starts.iter().any(|&s| s >= env.n_actions()) {
        return Err(AgentError::InvalidConfig("start index outside the catalog".into()));
    }
    let n = env.n_actions();
    let gamma = env.config().discount;
    let mut q = QTable::new(config.key, n, env.horizon());
    let mut visits = config.alpha_visit_exponent.map(|_| vec![0u32; q.values.len()]);
    let mut rng = rng_from_seed(config.seed);

    for episode in 0..config.episodes {
        let eps = config.epsilon.at(episode, config.episodes);
        let start = draw_start(env, starts, &mut rng);
        let mut state = env.reset(env.job(start)).expect("catalog job");
        let mut action = epsilon_greedy(q.state_values(&state), eps, &mut rng);
        loop {
            let row = q.row(state.current, state.t);
            let (reward, _, done) = env
                .step_mut(&mut state, action, &mut rng)
                .expect("valid step inside the horizon");
            let (bootstrap, next_action) = if done {
                (0.0, 0)
            } else {
                let next_row = q.row(state.current, state.t);
                match target {
                    Target::Sarsa => {
                        let a = epsilon_greedy(q.row_values(next_row), eps, &mut rng);
                        (q.row_values(next_row)[a], a)
                    }
                    Target::QLearning => {
                        let a = epsilon_greedy(q.row_values(next_row), eps, &mut rng);
                        (q.max_value(next_row), a)
                    }
                }
            };
            let idx = row * n + action;
            let alpha = match (&mut visits, config.alpha_visit_exponent) {
                (Some(v), Some(w)) => {
                    v[idx] += 1;
                    config.alpha * f64::from(v[idx]).powf(-w)
                }
                _ => config.alpha,
            };
            let td_target = reward + gamma * bootstrap;
            q.values[idx] += alpha * (td_target - q.values[idx]);
            if done {
                break;
            }
            action = next_action;
        }
    }
    Ok(q)
}
