//! Policy learners and baselines.
//!
//! Every policy works on catalog indices: [`Policy::act`] returns the index of
//! the job to apply to. [`Policy::action_distribution`] exposes the exact
//! action probabilities, which the exact evaluators rely on.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::ApproxError;
use crate::env::{Env, State};
use crate::rng::SimRng;

mod a2c;
mod baselines;
mod dqn;
mod features;
mod tabular;

#[cfg(test)]
mod tests;

pub use a2c::{a2c_train, A2cConfig, A2cPolicy};
pub use baselines::{
    baseline_highest_expected_reward, baseline_most_common, GreedyHighestExpectedReward, GreedyMostCommon,
    ReplayPolicy,
};
pub use dqn::{dqn_train, DqnConfig, DqnPolicy, ReplayBuffer, Transition};
pub use features::StateFeatures;
pub use tabular::{q_learning_train, sarsa_train, sarsa_train_from, q_learning_train_from, QTable, TabularKey, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("tabular methods need the last-job representation")]
    FullHistoryTabular,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at episode {episode}, step {step}: {source}")]
    NonFinite {
        episode: usize,
        step: u32,
        source: ApproxError,
    },
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error("policy does not fit this environment: {0}")]
    Mismatch(String),
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Actions with positive probability, with their probabilities.
    fn action_distribution(&self, env: &Env, state: &State) -> Vec<(usize, f64)>;

    fn act(&self, env: &Env, state: &State, rng: &mut SimRng) -> usize {
        sample_distribution(&self.action_distribution(env, state), rng)
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn action_distribution(&self, env: &Env, state: &State) -> Vec<(usize, f64)> {
        (**self).action_distribution(env, state)
    }
    fn act(&self, env: &Env, state: &State, rng: &mut SimRng) -> usize {
        (**self).act(env, state, rng)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn action_distribution(&self, env: &Env, state: &State) -> Vec<(usize, f64)> {
        (**self).action_distribution(env, state)
    }
    fn act(&self, env: &Env, state: &State, rng: &mut SimRng) -> usize {
        (**self).act(env, state, rng)
    }
}

/// Algorithms a trained policy can come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sarsa,
    Qlearning,
    Dqn,
    A2c,
    GreedyCommon,
    GreedyHer,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sarsa,
        Algorithm::Qlearning,
        Algorithm::Dqn,
        Algorithm::A2c,
        Algorithm::GreedyCommon,
        Algorithm::GreedyHer,
    ];

    pub fn is_tabular(self) -> bool {
        matches!(self, Algorithm::Sarsa | Algorithm::Qlearning)
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Sarsa => "Sarsa",
            Algorithm::Qlearning => "Q-Learning",
            Algorithm::Dqn => "DQN",
            Algorithm::A2c => "A2C",
            Algorithm::GreedyCommon => "Greedy Most Common",
            Algorithm::GreedyHer => "Greedy Highest Expected Reward",
        }
    }
}

/// Indices holding the maximum score. Exact comparisons only, so the result
/// is unchanged by positive rescaling.
pub fn argmax_set(scores: &[f64]) -> Vec<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for (i, &s) in scores.iter().enumerate() {
        if s > best {
            best = s;
            out.clear();
            out.push(i);
        } else if s == best {
            out.push(i);
        }
    }
    out
}

/// Argmax with uniform-random tie breaking.
pub fn argmax_random_tie(scores: &[f64], rng: &mut SimRng) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut chosen = 0;
    let mut ties = 0u32;
    for (i, &s) in scores.iter().enumerate() {
        if s > best {
            best = s;
            chosen = i;
            ties = 1;
        } else if s == best {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                chosen = i;
            }
        }
    }
    chosen
}

/// Uniform distribution over the maximisers.
pub fn argmax_distribution(scores: &[f64]) -> Vec<(usize, f64)> {
    let set = argmax_set(scores);
    let p = 1.0 / set.len() as f64;
    set.into_iter().map(|i| (i, p)).collect()
}

pub fn sample_distribution(dist: &[(usize, f64)], rng: &mut SimRng) -> usize {
    if dist.len() == 1 {
        return dist[0].0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(a, p) in dist {
        acc += p;
        if u < acc {
            return a;
        }
    }
    dist.last().expect("nonempty action distribution").0
}

/// Linear epsilon decay from `start` to `end` over the first `fraction` of
/// `episodes`, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.8,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            start: eps,
            end: eps,
            decay_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let ok = (0.0..=1.0).contains(&self.start)
            && (0.0..=1.0).contains(&self.end)
            && (0.0..=1.0).contains(&self.decay_fraction);
        if ok {
            Ok(())
        } else {
            Err(AgentError::InvalidConfig("epsilon schedule values must lie in [0,1]".into()))
        }
    }

    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        let span = self.decay_fraction * episodes as f64;
        if span <= 0.0 {
            return self.end;
        }
        let frac = episode as f64 / span;
        if frac >= 1.0 {
            self.end
        } else {
            self.start + (self.end - self.start) * frac
        }
    }
}

/// Picks a uniformly random action with probability `eps`, otherwise the
/// greedy one (random ties).
pub(crate) fn epsilon_greedy(scores: &[f64], eps: f64, rng: &mut SimRng) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..scores.len())
    } else {
        argmax_random_tie(scores, rng)
    }
}

/// Scale that maps step rewards into roughly [0, 1] for the networks.
pub(crate) fn reward_scale(env: &Env) -> f64 {
    let max = (0..env.n_actions()).map(|j| env.step_salary(j)).fold(0.0, f64::max);
    if max > 0.0 {
        1.0 / max
    } else {
        1.0
    }
}

/// Start jobs drawn uniformly from `starts` (or the catalog when empty).
pub(crate) fn draw_start(env: &Env, starts: &[usize], rng: &mut SimRng) -> usize {
    if starts.is_empty() {
        rng.random_range(0..env.n_actions())
    } else {
        starts[rng.random_range(0..starts.len())]
    }
}
