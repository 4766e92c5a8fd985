use std::sync::Arc;

use super::EvalError;
use crate::env::{Env, EnvConfig, HeldJob, State, TableDynamics};
use crate::rng::indexed_seed;
use crate::models::StateRepresentation;

/// An explicit finite-horizon MDP with `p[s][a][s']` and `r[s][a][s']`
/// stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
}

/// Exact action values and the optimal action sets for every (t, s).
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// `q[(t * n_states + s) * n_actions + a]`.
    pub q: Vec<f64>,
}

impl OracleSolution {
    pub fn q(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q[(t * self.n_states + s) * self.n_actions + a]
    }

    pub fn q_row(&self, t: usize, s: usize) -> &[f64] {
        let base = (t * self.n_states + s) * self.n_actions;
        &self.q[base..base + self.n_actions]
    }

    pub fn value(&self, t: usize, s: usize) -> f64 {
        self.q_row(t, s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions within `tol` of the best value at (t, s).
    pub fn optimal_actions(&self, t: usize, s: usize, tol: f64) -> Vec<usize> {
        let best = self.value(t, s);
        (0..self.n_actions).filter(|&a| self.q(t, s, a) >= best - tol).collect()
    }

    pub fn max_abs_q(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ExplicitMdp {
    pub fn idx(&self, s: usize, a: usize, s2: usize) -> usize {
        (s * self.n_actions + a) * self.n_states + s2
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let err = |m: &str| Err(EvalError::MalformedMdp(m.into()));
        if self.n_states == 0 || self.n_actions == 0 {
            return err("empty state or action set");
        }
        let len = self.n_states * self.n_actions * self.n_states;
        if self.transition.len() != len || self.reward.len() != len {
            return err("tensor length does not match the state and action counts");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return err("gamma must lie in [0,1]");
        }
        if self.reward.iter().any(|r| !r.is_finite()) {
            return err("non-finite reward");
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = &self.transition[self.idx(s, a, 0)..self.idx(s, a, 0) + self.n_states];
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return err("transition rows must be probability vectors");
                }
            }
        }
        Ok(())
    }

    /// The explicit form of a last-job environment: applying to `a` moves
    /// there with the hire probability and otherwise stays; the reward is the
    /// step salary of the resulting job.
    pub fn from_env(env: &Env) -> Result<Self, EvalError> {
        if env.representation() != StateRepresentation::LastJob {
            return Err(EvalError::MalformedMdp("explicit form needs the last-job representation".into()));
        }
        let n = env.n_actions();
        let mut mdp = ExplicitMdp {
            n_states: n,
            n_actions: n,
            horizon: env.horizon() as usize,
            gamma: env.config().discount,
            transition: vec![0.0; n * n * n],
            reward: vec![0.0; n * n * n],
        };
        for s in 0..n {
            let state = State {
                current: s,
                history: vec![HeldJob {
                    job: env.job(s),
                    months: 0,
                }],
                t: 0,
                since: 0,
            };
            for a in 0..n {
                let p = env.hire_probability(&state, a);
                let (hit, miss) = (mdp.idx(s, a, a), mdp.idx(s, a, s));
                mdp.transition[hit] += p;
                mdp.transition[miss] += 1.0 - p;
                for s2 in 0..n {
                    let i = mdp.idx(s, a, s2);
                    mdp.reward[i] = env.step_salary(s2);
                }
            }
        }
        Ok(mdp)
    }

    fn expected_q(&self, s: usize, a: usize, next_value: impl Fn(usize) -> f64) -> f64 {
        (0..self.n_states)
            .map(|s2| {
                let i = self.idx(s, a, s2);
                let p = self.transition[i];
                if p == 0.0 {
                    0.0
                } else {
                    p * (self.reward[i] + self.gamma * next_value(s2))
                }
            })
            .sum()
    }
}

/// Backward induction over the horizon.
pub fn value_iteration_oracle(mdp: &ExplicitMdp) -> Result<OracleSolution, EvalError> {
    mdp.validate()?;
    let (ns, na, h) = (mdp.n_states, mdp.n_actions, mdp.horizon);
    let mut sol = OracleSolution {
        n_states: ns,
        n_actions: na,
        horizon: h,
        q: vec![0.0; h * ns * na],
    };
    let mut next_v = vec![0.0; ns];
    for t in (0..h).rev() {
        for s in 0..ns {
            for a in 0..na {
                sol.q[(t * ns + s) * na + a] = mdp.expected_q(s, a, |s2| next_v[s2]);
            }
        }
        next_v = (0..ns).map(|s| sol.value(t, s)).collect();
    }
    Ok(sol)
}

/// Action values of a fixed (possibly stochastic, time-dependent) policy.
/// `policy(t, s)` returns (action, probability) pairs.
pub fn policy_evaluation_oracle(
    mdp: &ExplicitMdp,
    policy: impl Fn(usize, usize) -> Vec<(usize, f64)>,
) -> Result<OracleSolution, EvalError> {
    mdp.validate()?;
    let (ns, na, h) = (mdp.n_states, mdp.n_actions, mdp.horizon);
    let mut sol = OracleSolution {
        n_states: ns,
        n_actions: na,
        horizon: h,
        q: vec![0.0; h * ns * na],
    };
    let mut next_v = vec![0.0; ns];
    for t in (0..h).rev() {
        for s in 0..ns {
            for a in 0..na {
                sol.q[(t * ns + s) * na + a] = mdp.expected_q(s, a, |s2| next_v[s2]);
            }
        }
        next_v = (0..ns)
            .map(|s| policy(t, s).into_iter().map(|(a, p)| p * sol.q(t, s, a)).sum())
            .collect();
    }
    Ok(sol)
}

/// Smallest difference between the best and second-best action value over
/// all (t, s), relative to the largest |Q|.
pub fn min_relative_action_gap(sol: &OracleSolution) -> f64 {
    let scale = sol.max_abs_q().max(f64::MIN_POSITIVE);
    let mut gap = f64::INFINITY;
    for t in 0..sol.horizon {
        for s in 0..sol.n_states {
            let best = sol.value(t, s);
            let second = sol
                .q_row(t, s)
                .iter()
                .copied()
                .filter(|&q| q < best)
                .fold(f64::NEG_INFINITY, f64::max);
            let ties = sol.q_row(t, s).iter().filter(|&&q| q == best).count();
            let g = if ties > 1 { 0.0 } else { best - second };
            gap = gap.min(g / scale);
        }
    }
    gap
}

/// A random last-job MDP over `n_jobs` jobs and `horizon` steps whose optimal
/// action is unambiguous: candidates (`TableDynamics::random` under derived
/// seeds) are drawn until the best action beats the runner-up by at least
/// `min_gap` of the largest |Q| everywhere.
pub fn separated_random_env(n_jobs: u16, horizon: u32, min_gap: f64, seed: u64) -> (Env, OracleSolution) {
    for k in 0.. {
        let dynamics = TableDynamics::random(n_jobs, indexed_seed(seed, k));
        let config = EnvConfig {
            horizon_steps: horizon,
            step_months: 3,
            discount: 1.0,
        };
        let env = Env::new(config, Arc::new(dynamics));
        let sol = value_iteration_oracle(&ExplicitMdp::from_env(&env).expect("last-job env")).expect("valid MDP");
        if min_relative_action_gap(&sol) >= min_gap {
            return (env, sol);
        }
    }
    unreachable!("the candidate stream is unbounded")
}
