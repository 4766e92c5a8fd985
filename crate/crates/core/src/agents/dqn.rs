use std::collections::VecDeque;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{
    argmax_distribution, argmax_random_tie, draw_start, epsilon_greedy, reward_scale, AgentError, EpsilonSchedule,
    Policy, StateFeatures,
};
use crate::approx::{Activation, AdamState, ForwardCache, Loss, Mlp, OutputActivation};
use crate::env::{Env, State};
use crate::rng::{child_seed, rng_from_seed, SimRng};

/// One stored transition; features are kept in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f32>,
    pub done: bool,
}

/// FIFO experience replay.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.clamp(1, 1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `n` distinct transitions chosen uniformly (fewer if the buffer is
    /// smaller).
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Updates between target-network synchronisations.
    pub target_sync: usize,
    /// Transitions collected before the first update.
    pub learning_starts: usize,
    pub epsilon: EpsilonSchedule,
    /// Supplied by the caller at run time; not part of the serialised form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            episodes: 2_000,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            learning_rate: 1e-3,
            batch_size: 32,
            buffer_capacity: 50_000,
            target_sync: 500,
            learning_starts: 500,
            epsilon: EpsilonSchedule::default(),
            seed: 0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.episodes == 0 || self.batch_size == 0 || self.buffer_capacity == 0 || self.target_sync == 0 {
            return Err(AgentError::InvalidConfig(
                "episodes, batch_size, buffer_capacity and target_sync must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(AgentError::InvalidConfig("hidden layer sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AgentError::InvalidConfig("learning_rate must be positive".into()));
        }
        self.epsilon.validate()
    }
}

/// Greedy policy over a Q-network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnPolicy {
    pub features: StateFeatures,
    pub net: Mlp,
}

impl DqnPolicy {
    pub fn q_values(&self, state: &State) -> Vec<f64> {
        self.net.forward(&self.features.encode(state)).expect("feature width matches the network")
    }
}

impl Policy for DqnPolicy {
    fn name(&self) -> &str {
        "dqn"
    }

    fn action_distribution(&self, _env: &Env, state: &State) -> Vec<(usize, f64)> {
        argmax_distribution(&self.q_values(state))
    }

    fn act(&self, _env: &Env, state: &State, rng: &mut SimRng) -> usize {
        argmax_random_tie(&self.q_values(state), rng)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DqnStats {
    pub updates: usize,
    pub target_syncs: usize,
    pub transitions: usize,
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn to_f64(v: &[f32], out: &mut Vec<f64>) {
    out.clear();
    out.extend(v.iter().map(|&x| f64::from(x)));
}

/// Deep Q-learning with experience replay and a periodically synchronised
/// target network. Rewards are rescaled so the best step reward is 1.
pub fn dqn_train(env: &Env, config: &DqnConfig, starts: &[usize]) -> Result<(DqnPolicy, DqnStats), AgentError> {
    config.validate()?;
    let features = StateFeatures::for_env(env);
    let n = env.n_actions();
    let mut dims = vec![features.dim()];
    dims.extend(&config.hidden);
    dims.push(n);
    let mut online = Mlp::new(&dims, config.activation, OutputActivation::Linear, child_seed(config.seed, "init"))?;
    let mut target = online.clone();
    let mut adam = AdamState::for_net(&online, config.learning_rate);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut rng = rng_from_seed(config.seed);
    let scale = reward_scale(env);
    let gamma = env.config().discount;

    let mut stats = DqnStats::default();
    let mut grads = vec![0.0; online.n_params()];
    let mut cache = ForwardCache::default();
    let mut xs = Vec::new();
    let mut xn = Vec::new();

    for episode in 0..config.episodes {
        let eps = config.epsilon.at(episode, config.episodes);
        let start = draw_start(env, starts, &mut rng);
        let mut state = env.reset(env.job(start)).expect("catalog job");
        let mut phi = features.encode(&state);
        loop {
            let q = online.forward(&phi)?;
            let action = epsilon_greedy(&q, eps, &mut rng);
            let step_t = state.t;
            let (reward, _, done) = env.step_mut(&mut state, action, &mut rng).expect("valid step");
            let phi_next = features.encode(&state);
            buffer.push(Transition {
                state: to_f32(&phi),
                action,
                reward: reward * scale,
                next_state: to_f32(&phi_next),
                done,
            });
            stats.transitions += 1;

            if stats.transitions >= config.learning_starts && buffer.len() >= config.batch_size {
                grads.iter_mut().for_each(|g| *g = 0.0);
                let batch = buffer.sample(config.batch_size, &mut rng);
                let w = 1.0 / batch.len() as f64;
                for tr in batch {
                    let bootstrap = if tr.done {
                        0.0
                    } else {
                        to_f64(&tr.next_state, &mut xn);
                        target.forward(&xn)?.into_iter().fold(f64::NEG_INFINITY, f64::max)
                    };
                    to_f64(&tr.state, &mut xs);
                    let loss = Loss::SelectedSquaredError {
                        index: tr.action,
                        target: tr.reward + gamma * bootstrap,
                        weight: 1.0,
                    };
                    online
                        .accumulate_grad(&xs, loss, w, &mut cache, &mut grads)
                        .map_err(|source| AgentError::NonFinite {
                            episode,
                            step: step_t,
                            source,
                        })?;
                }
                adam.step(online.params_mut(), &grads)?;
                stats.updates += 1;
                if stats.updates % config.target_sync == 0 {
                    target = online.clone();
                    stats.target_syncs += 1;
                }
            }
            if done {
                break;
            }
            phi = phi_next;
        }
    }
    Ok((DqnPolicy { features, net: online }, stats))
}
