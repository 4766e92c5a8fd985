//! The episodic labor-market MDP.
//!
//! Each step lasts `step_months` months. The agent applies to one catalog job;
//! with the transition probability it is hired and moves there, otherwise it
//! stays put. The step pays the salary of the job held after the application
//! is resolved. There is no application cost and no unemployment.
//!
//! A failed application leaves the state as it was apart from the step
//! counter: the history only changes on a move, when the job being left is
//! credited with the months it was held.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Policy;
use crate::market::JobId;
use crate::models::{
    encode_into, CareerHistory, HistorySpan, SalaryModel, StateRepresentation, TransitionModel,
};
use crate::rng::SimRng;

pub const DAYS_PER_MONTH: f64 = 30.4375;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("job {0} is not in the catalog")]
    UnknownJob(JobId),
    #[error("action index {0} is out of range")]
    InvalidAction(usize),
    #[error("episode is over (t = {0})")]
    Done(u32),
    #[error("invalid dynamics: {0}")]
    InvalidDynamics(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub horizon_steps: u32,
    pub step_months: u32,
    pub discount: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 40,
            step_months: 3,
            discount: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon_steps == 0 {
            return Err("horizon_steps must be positive".into());
        }
        if self.step_months == 0 {
            return Err("step_months must be positive".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err("discount must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// A job held for a number of months.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeldJob {
    pub job: JobId,
    pub months: u32,
}

/// Agent state: the current catalog job (as an index), the work history and
/// the step counter. The last history entry is always the current job.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub current: usize,
    pub history: Vec<HeldJob>,
    pub t: u32,
    /// Step at which the current job was taken.
    pub since: u32,
}

impl State {
    /// The history as day-axis spans, with `now` at the end of the last one.
    pub fn career_history(&self) -> CareerHistory {
        let mut day = 0.0;
        let spans = self
            .history
            .iter()
            .map(|h| {
                let start = day;
                day += f64::from(h.months) * DAYS_PER_MONTH;
                HistorySpan {
                    job: h.job,
                    start_day: start,
                    end_day: day,
                }
            })
            .collect();
        CareerHistory { spans, now: day }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: State,
    pub reward_eur: f64,
    pub hired: bool,
    pub done: bool,
}

/// Hire probabilities and salaries behind an [`Env`].
pub trait Dynamics: Send + Sync {
    fn catalog(&self) -> &[JobId];
    fn representation(&self) -> StateRepresentation;
    /// Probability that applying to catalog job `action` from `state` succeeds.
    fn hire_probability(&self, state: &State, action: usize) -> f64;
    fn annual_salary(&self, job: usize) -> f64;

    fn hire_probabilities(&self, state: &State) -> Vec<f64> {
        (0..self.catalog().len())
            .map(|a| self.hire_probability(state, a))
            .collect()
    }
}

/// Dynamics backed by the fitted transition and salary models.
pub struct LearnedDynamics {
    transition: Arc<TransitionModel>,
    annual: Vec<f64>,
}

impl LearnedDynamics {
    pub fn new(transition: Arc<TransitionModel>, salary: &SalaryModel) -> Self {
        let annual = transition
            .catalog()
            .iter()
            .map(|&j| salary.annual_salary(j))
            .collect();
        Self { transition, annual }
    }

    pub fn transition(&self) -> &TransitionModel {
        &self.transition
    }
}

impl Dynamics for LearnedDynamics {
    fn catalog(&self) -> &[JobId] {
        self.transition.catalog()
    }

    fn representation(&self) -> StateRepresentation {
        self.transition.representation()
    }

    fn hire_probability(&self, state: &State, action: usize) -> f64 {
        match self.transition.representation() {
            StateRepresentation::LastJob => self
                .transition
                .last_job_probability(state.current, action)
                .expect("catalog index"),
            StateRepresentation::FullHistory => {
                let mut buf = Vec::with_capacity(self.representation().n_features());
                let target = self.catalog()[action];
                encode_into(&state.career_history(), target, StateRepresentation::FullHistory, &mut buf)
                    .expect("full-history encoding is total");
                self.transition.classifier().predict_unchecked(&buf)
            }
        }
    }

    fn hire_probabilities(&self, state: &State) -> Vec<f64> {
        match self.transition.representation() {
            StateRepresentation::LastJob => (0..self.annual.len())
                .map(|a| self.hire_probability(state, a))
                .collect(),
            StateRepresentation::FullHistory => {
                let history = state.career_history();
                let mut buf = Vec::with_capacity(self.representation().n_features());
                self.catalog()
                    .iter()
                    .map(|&target| {
                        encode_into(&history, target, StateRepresentation::FullHistory, &mut buf)
                            .expect("full-history encoding is total");
                        self.transition.classifier().predict_unchecked(&buf)
                    })
                    .collect()
            }
        }
    }

    fn annual_salary(&self, job: usize) -> f64 {
        self.annual[job]
    }
}

/// Explicit last-job dynamics: `probs[from * n + to]` and annual salaries.
#[derive(Clone, Debug, PartialEq)]
pub struct TableDynamics {
    catalog: Vec<JobId>,
    probs: Vec<f64>,
    annual: Vec<f64>,
}

impl TableDynamics {
    pub fn new(catalog: Vec<JobId>, probs: Vec<f64>, annual: Vec<f64>) -> Result<Self, EnvError> {
        let n = catalog.len();
        if n == 0 || probs.len() != n * n || annual.len() != n {
            return Err(EnvError::InvalidDynamics("shape mismatch".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(EnvError::InvalidDynamics("probabilities must lie in [0,1]".into()));
        }
        if annual.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(EnvError::InvalidDynamics("salaries must be finite and nonnegative".into()));
        }
        Ok(Self {
            catalog,
            probs,
            annual,
        })
    }

    /// Every application succeeds with the same probability.
    pub fn uniform(catalog: Vec<JobId>, p: f64, annual: Vec<f64>) -> Result<Self, EnvError> {
        let n = catalog.len();
        Self::new(catalog, vec![p; n * n], annual)
    }

    /// Random dynamics over `n` jobs: hire probabilities uniform in
    /// [0.05, 0.95], annual salaries uniform in [20,000, 100,000).
    pub fn random(n: u16, seed: u64) -> Self {
        let mut rng = crate::rng::rng_from_seed(seed);
        let n_us = usize::from(n);
        let catalog = (0..n).map(|i| JobId::new(i, i)).collect();
        let probs = (0..n_us * n_us).map(|_| rng.random_range(0.05..=0.95)).collect();
        let annual = (0..n_us).map(|_| rng.random_range(20_000.0..100_000.0)).collect();
        Self::new(catalog, probs, annual).expect("valid random dynamics")
    }

    pub fn probability(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.catalog.len() + to]
    }
}

impl Dynamics for TableDynamics {
    fn catalog(&self) -> &[JobId] {
        &self.catalog
    }

    fn representation(&self) -> StateRepresentation {
        StateRepresentation::LastJob
    }

    fn hire_probability(&self, state: &State, action: usize) -> f64 {
        self.probability(state.current, action)
    }

    fn annual_salary(&self, job: usize) -> f64 {
        self.annual[job]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: u32,
    pub job: JobId,
    pub action: JobId,
    pub hired: bool,
    pub next_job: JobId,
    pub reward_eur: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub start: JobId,
    pub steps: Vec<TraceStep>,
    pub final_state: State,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward_eur).sum()
    }

    pub fn final_job(&self) -> JobId {
        self.steps.last().map_or(self.start, |s| s.next_job)
    }
}

/// Writes episode traces as CSV.
pub fn write_trace_csv<W: Write>(writer: W, episodes: &[Episode]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "episode",
        "step",
        "occupation",
        "industry",
        "action_occupation",
        "action_industry",
        "hired",
        "reward_eur",
    ])?;
    for (e, ep) in episodes.iter().enumerate() {
        for s in &ep.steps {
            w.write_record([
                e.to_string(),
                s.t.to_string(),
                s.job.occupation.to_string(),
                s.job.industry.to_string(),
                s.action.occupation.to_string(),
                s.action.industry.to_string(),
                u8::from(s.hired).to_string(),
                s.reward_eur.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone)]
pub struct Env {
    config: EnvConfig,
    dynamics: Arc<dyn Dynamics>,
    index: Arc<HashMap<JobId, usize>>,
}

impl std::fmt::Debug for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Env")
            .field("config", &self.config)
            .field("catalog_size", &self.catalog().len())
            .finish()
    }
}

impl Env {
    pub fn new(config: EnvConfig, dynamics: Arc<dyn Dynamics>) -> Self {
        let index = dynamics
            .catalog()
            .iter()
            .enumerate()
            .map(|(i, j)| (*j, i))
            .collect();
        Self {
            config,
            dynamics,
            index: Arc::new(index),
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn catalog(&self) -> &[JobId] {
        self.dynamics.catalog()
    }

    pub fn n_actions(&self) -> usize {
        self.catalog().len()
    }

    pub fn representation(&self) -> StateRepresentation {
        self.dynamics.representation()
    }

    pub fn horizon(&self) -> u32 {
        self.config.horizon_steps
    }

    /// Same dynamics, different episode length.
    pub fn with_horizon(&self, horizon_steps: u32) -> Env {
        Env {
            config: EnvConfig {
                horizon_steps,
                ..self.config.clone()
            },
            dynamics: Arc::clone(&self.dynamics),
            index: Arc::clone(&self.index),
        }
    }

    pub fn job_index(&self, job: JobId) -> Option<usize> {
        self.index.get(&job).copied()
    }

    pub fn job(&self, index: usize) -> JobId {
        self.catalog()[index]
    }

    /// Reward for holding catalog job `job` during one step.
    pub fn step_salary(&self, job: usize) -> f64 {
        self.dynamics.annual_salary(job) * f64::from(self.config.step_months) / 12.0
    }

    pub fn monthly_salary(&self, job: usize) -> f64 {
        self.dynamics.annual_salary(job) / 12.0
    }

    pub fn reset(&self, start_job: JobId) -> Result<State, EnvError> {
        let current = self.job_index(start_job).ok_or(EnvError::UnknownJob(start_job))?;
        Ok(State {
            current,
            history: vec![HeldJob {
                job: start_job,
                months: 0,
            }],
            t: 0,
            since: 0,
        })
    }

    /// Starts from an existing work history; its last entry must be a catalog
    /// job.
    pub fn reset_with_history(&self, history: Vec<HeldJob>) -> Result<State, EnvError> {
        let last = history
            .last()
            .ok_or_else(|| EnvError::InvalidDynamics("empty history".into()))?;
        let current = self.job_index(last.job).ok_or(EnvError::UnknownJob(last.job))?;
        Ok(State {
            current,
            history,
            t: 0,
            since: 0,
        })
    }

    pub fn hire_probability(&self, state: &State, action: usize) -> f64 {
        self.dynamics.hire_probability(state, action)
    }

    /// Resolves one application in place and returns (reward, hired, done).
    pub fn step_mut(&self, state: &mut State, action: usize, rng: &mut SimRng) -> Result<(f64, bool, bool), EnvError> {
        if state.t >= self.config.horizon_steps {
            return Err(EnvError::Done(state.t));
        }
        if action >= self.n_actions() {
            return Err(EnvError::InvalidAction(action));
        }
        let p = self.dynamics.hire_probability(state, action);
        let u: f64 = rng.random();
        let hired = u < p;
        let reward = self.advance(state, action, hired);
        Ok((reward, hired, state.t == self.config.horizon_steps))
    }

    /// Applies a resolved application and returns the step reward. A hire into
    /// another job credits the job being left with the months since it was
    /// taken; nothing else in the history changes.
    pub fn advance(&self, state: &mut State, action: usize, hired: bool) -> f64 {
        if hired && action != state.current {
            if let Some(last) = state.history.last_mut() {
                last.months += (state.t - state.since) * self.config.step_months;
            }
            state.current = action;
            state.history.push(HeldJob {
                job: self.job(action),
                months: 0,
            });
            state.since = state.t;
        }
        state.t += 1;
        self.step_salary(state.current)
    }

    pub fn step(&self, state: &State, action: usize, rng: &mut SimRng) -> Result<StepOutcome, EnvError> {
        let mut next_state = state.clone();
        let (reward_eur, hired, done) = self.step_mut(&mut next_state, action, rng)?;
        Ok(StepOutcome {
            next_state,
            reward_eur,
            hired,
            done,
        })
    }

    /// Runs `policy` from `state` for `n_steps` steps (bounded by the
    /// horizon).
    pub fn rollout_from(&self, policy: &dyn Policy, mut state: State, n_steps: u32, rng: &mut SimRng) -> Episode {
        let start = self.job(state.current);
        let mut steps = Vec::with_capacity(n_steps as usize);
        for _ in 0..n_steps {
            if state.t >= self.config.horizon_steps {
                break;
            }
            let t = state.t;
            let job = self.job(state.current);
            let action = policy.act(self, &state, rng);
            let (reward_eur, hired, _) = self
                .step_mut(&mut state, action, rng)
                .expect("policy returned a catalog action");
            steps.push(TraceStep {
                t,
                job,
                action: self.job(action),
                hired,
                next_job: self.job(state.current),
                reward_eur,
            });
        }
        Episode {
            start,
            steps,
            final_state: state,
        }
    }

    /// A full-horizon episode from `start_job`.
    pub fn rollout(&self, policy: &dyn Policy, start_job: JobId, rng: &mut SimRng) -> Result<Episode, EnvError> {
        let state = self.reset(start_job)?;
        Ok(self.rollout_from(policy, state, self.config.horizon_steps, rng))
    }
}
