use serde::{Deserialize, Serialize};

use super::{argmax_distribution, draw_start, reward_scale, sample_distribution, AgentError, Policy, StateFeatures};
use crate::approx::{Activation, AdamState, ForwardCache, Loss, Mlp, OutputActivation};
use crate::env::{Env, State};
use crate::rng::{child_seed, rng_from_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub entropy_coef: f64,
    /// Supplied by the caller at run time; not part of the serialised form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for A2cConfig {
    fn default() -> Self {
        Self {
            episodes: 2_000,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            actor_learning_rate: 1e-3,
            critic_learning_rate: 1e-3,
            entropy_coef: 0.01,
            seed: 0,
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.episodes == 0 || self.hidden.contains(&0) {
            return Err(AgentError::InvalidConfig("episodes and hidden sizes must be positive".into()));
        }
        let lr_ok = |lr: f64| lr > 0.0 && lr.is_finite();
        if !lr_ok(self.actor_learning_rate) || !lr_ok(self.critic_learning_rate) {
            return Err(AgentError::InvalidConfig("learning rates must be positive".into()));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(AgentError::InvalidConfig("entropy_coef must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Actor and critic. The actor is sampled unless `greedy` is set, in which
/// case its most probable action is taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2cPolicy {
    pub features: StateFeatures,
    pub actor: Mlp,
    pub critic: Mlp,
    pub greedy: bool,
}

impl A2cPolicy {
    pub fn probabilities(&self, state: &State) -> Vec<f64> {
        self.actor.forward(&self.features.encode(state)).expect("feature width matches the network")
    }

    pub fn value(&self, state: &State) -> f64 {
        self.critic.forward(&self.features.encode(state)).expect("feature width matches the network")[0]
    }

    /// The most probable action.
    pub fn mode(&self, state: &State) -> usize {
        argmax_distribution(&self.probabilities(state))[0].0
    }
}

impl Policy for A2cPolicy {
    fn name(&self) -> &str {
        "a2c"
    }

    fn action_distribution(&self, _env: &Env, state: &State) -> Vec<(usize, f64)> {
        let probs = self.probabilities(state);
        if self.greedy {
            argmax_distribution(&probs)
        } else {
            probs.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct A2cStats {
    pub updates: usize,
    /// Largest deviation of the actor's probabilities from summing to one.
    pub max_normalisation_error: f64,
}

/// One-step advantage actor-critic with simultaneous Adam updates of both
/// networks. Rewards are rescaled so the best step reward is 1.
pub fn a2c_train(env: &Env, config: &A2cConfig, starts: &[usize]) -> Result<(A2cPolicy, A2cStats), AgentError> {
    config.validate()?;
    let features = StateFeatures::for_env(env);
    let n = env.n_actions();
    let mut dims = vec![features.dim()];
    dims.extend(&config.hidden);
    let mut actor_dims = dims.clone();
    actor_dims.push(n);
    dims.push(1);
    let mut actor = Mlp::new(&actor_dims, config.activation, OutputActivation::Softmax, child_seed(config.seed, "actor"))?;
    let mut critic = Mlp::new(&dims, config.activation, OutputActivation::Linear, child_seed(config.seed, "critic"))?;
    let mut actor_opt = AdamState::for_net(&actor, config.actor_learning_rate);
    let mut critic_opt = AdamState::for_net(&critic, config.critic_learning_rate);
    let mut rng = rng_from_seed(config.seed);
    let scale = reward_scale(env);
    let gamma = env.config().discount;

    let mut stats = A2cStats::default();
    let mut actor_grads = vec![0.0; actor.n_params()];
    let mut critic_grads = vec![0.0; critic.n_params()];
    let mut cache = ForwardCache::default();

    for episode in 0..config.episodes {
        let start = draw_start(env, starts, &mut rng);
        let mut state = env.reset(env.job(start)).expect("catalog job");
        let mut phi = features.encode(&state);
        loop {
            let probs = actor.forward(&phi)?;
            stats.max_normalisation_error = stats.max_normalisation_error.max((probs.iter().sum::<f64>() - 1.0).abs());
            let dist: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
            let action = sample_distribution(&dist, &mut rng);
            let step_t = state.t;
            let (reward, _, done) = env.step_mut(&mut state, action, &mut rng).expect("valid step");
            let phi_next = features.encode(&state);
            let v = critic.forward(&phi)?[0];
            let v_next = if done { 0.0 } else { critic.forward(&phi_next)?[0] };
            let target = reward * scale + gamma * v_next;
            let advantage = target - v;
            let nonfinite = |source| AgentError::NonFinite {
                episode,
                step: step_t,
                source,
            };

            actor_grads.iter_mut().for_each(|g| *g = 0.0);
            critic_grads.iter_mut().for_each(|g| *g = 0.0);
            actor
                .accumulate_grad(
                    &phi,
                    Loss::PolicyGradient {
                        action,
                        advantage,
                        entropy_coef: config.entropy_coef,
                    },
                    1.0,
                    &mut cache,
                    &mut actor_grads,
                )
                .map_err(nonfinite)?;
            critic
                .accumulate_grad(&phi, Loss::ValueRegression { target }, 1.0, &mut cache, &mut critic_grads)
                .map_err(nonfinite)?;
            actor_opt.step(actor.params_mut(), &actor_grads)?;
            critic_opt.step(critic.params_mut(), &critic_grads)?;
            stats.updates += 1;
            if done {
                break;
            }
            phi = phi_next;
        }
    }
    Ok((
        A2cPolicy {
            features,
            actor,
            critic,
            greedy: false,
        },
        stats,
    ))
}
