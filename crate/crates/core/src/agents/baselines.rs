use std::collections::HashMap;
use std::sync::Mutex;

use super::{argmax_distribution, argmax_random_tie, Policy};
use crate::env::{Env, State};
use crate::models::StateRepresentation;
use crate::rng::SimRng;

const CACHE_LIMIT: usize = 200_000;

/// Memoised hire-probability vectors for full-history states, which are
/// expensive to score and recur across paths and episodes.
#[derive(Debug, Default)]
struct ProbabilityCache {
    map: Mutex<HashMap<State, Vec<f64>>>,
}

impl ProbabilityCache {
    fn probabilities(&self, env: &Env, state: &State) -> Vec<f64> {
        if env.representation() == StateRepresentation::LastJob {
            return env.dynamics().hire_probabilities(state);
        }
        // Step counters do not enter the hire model.
        let key = State {
            t: 0,
            since: 0,
            ..state.clone()
        };
        if let Some(p) = self.map.lock().expect("cache lock").get(&key) {
            return p.clone();
        }
        let p = env.dynamics().hire_probabilities(state);
        let mut map = self.map.lock().expect("cache lock");
        if map.len() >= CACHE_LIMIT {
            map.clear();
        }
        map.insert(key, p.clone());
        p
    }
}

fn her_scores(env: &Env, probs: Vec<f64>) -> Vec<f64> {
    probs
        .into_iter()
        .enumerate()
        .map(|(a, p)| p * env.step_salary(a))
        .collect()
}

/// Applies to the job with the highest hire probability.
pub fn baseline_most_common(env: &Env, state: &State, rng: &mut SimRng) -> usize {
    argmax_random_tie(&env.dynamics().hire_probabilities(state), rng)
}

/// Applies to the job maximising hire probability times its step salary.
pub fn baseline_highest_expected_reward(env: &Env, state: &State, rng: &mut SimRng) -> usize {
    argmax_random_tie(&her_scores(env, env.dynamics().hire_probabilities(state)), rng)
}

#[derive(Debug, Default)]
pub struct GreedyMostCommon {
    cache: ProbabilityCache,
}

impl GreedyMostCommon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scores(&self, env: &Env, state: &State) -> Vec<f64> {
        self.cache.probabilities(env, state)
    }
}

impl Policy for GreedyMostCommon {
    fn name(&self) -> &str {
        "greedy_common"
    }

    fn action_distribution(&self, env: &Env, state: &State) -> Vec<(usize, f64)> {
        argmax_distribution(&self.scores(env, state))
    }

    fn act(&self, env: &Env, state: &State, rng: &mut SimRng) -> usize {
        argmax_random_tie(&self.scores(env, state), rng)
    }
}

#[derive(Debug, Default)]
pub struct GreedyHighestExpectedReward {
    cache: ProbabilityCache,
}

impl GreedyHighestExpectedReward {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scores(&self, env: &Env, state: &State) -> Vec<f64> {
        her_scores(env, self.cache.probabilities(env, state))
    }
}

impl Policy for GreedyHighestExpectedReward {
    fn name(&self) -> &str {
        "greedy_her"
    }

    fn action_distribution(&self, env: &Env, state: &State) -> Vec<(usize, f64)> {
        argmax_distribution(&self.scores(env, state))
    }

    fn act(&self, env: &Env, state: &State, rng: &mut SimRng) -> usize {
        argmax_random_tie(&self.scores(env, state), rng)
    }
}

/// Applies at step t to a fixed job sequence (the last entry repeats).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayPolicy {
    jobs: Vec<usize>,
}

impl ReplayPolicy {
    pub fn new(jobs: Vec<usize>) -> Self {
        assert!(!jobs.is_empty(), "replay needs at least one job");
        Self { jobs }
    }

    pub fn jobs(&self) -> &[usize] {
        &self.jobs
    }
}

impl Policy for ReplayPolicy {
    fn name(&self) -> &str {
        "replay"
    }

    fn action_distribution(&self, _env: &Env, state: &State) -> Vec<(usize, f64)> {
        let t = (state.t as usize).min(self.jobs.len() - 1);
        vec![(self.jobs[t], 1.0)]
    }
}
