use std::sync::Arc;

use super::*;
use crate::env::{EnvConfig, TableDynamics};
use crate::eval::{policy_evaluation_oracle, value_iteration_oracle, ExplicitMdp, OracleSolution};
use crate::market::JobId;
use crate::models::StateRepresentation;
use crate::rng::rng_from_seed;
use proptest::prelude::*;

fn catalog(n: u16) -> Vec<JobId> {
    (0..n).map(|i| JobId::new(i, i)).collect()
}

fn env_from(dynamics: TableDynamics, horizon: u32, discount: f64) -> Env {
    let config = EnvConfig {
        horizon_steps: horizon,
        step_months: 3,
        discount,
    };
    Env::new(config, Arc::new(dynamics))
}

fn oracle_config(seed: u64) -> TrainConfig {
    TrainConfig {
        episodes: 100_000,
        alpha: 1.0,
        alpha_visit_exponent: Some(0.5),
        epsilon: EpsilonSchedule {
            start: 1.0,
            end: 0.02,
            decay_fraction: 0.8,
        },
        key: TabularKey::JobAndStep,
        seed,
    }
}

/// Greedy action at every (t, s) is one of the oracle's optimal actions.
fn greedy_is_optimal(q: &QTable, sol: &OracleSolution) -> bool {
    (0..sol.horizon).all(|t| {
        (0..sol.n_states).all(|s| {
            let greedy = argmax_set(q.row_values(q.row(s, t as u32)));
            let best = sol.optimal_actions(t, s, 1e-9 * sol.max_abs_q());
            greedy.iter().all(|a| best.contains(a))
        })
    })
}

fn q_gap(q: &QTable, sol: &OracleSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..sol.horizon {
        for s in 0..sol.n_states {
            for a in 0..sol.n_actions {
                worst = worst.max((q.get(s, t as u32, a) - sol.q(t, s, a)).abs());
            }
        }
    }
    worst
}

#[test]
fn single_state_single_action_converges_to_its_reward() {
    let d = TableDynamics::uniform(catalog(1), 1.0, vec![4.0]).unwrap();
    let env = env_from(d, 5, 0.0);
    let config = TrainConfig {
        episodes: 200,
        ..TrainConfig::default()
    };
    for q in [sarsa_train(&env, &config).unwrap(), q_learning_train(&env, &config).unwrap()] {
        assert!((q.get(0, 0, 0) - 1.0).abs() < 1e-3, "{}", q.get(0, 0, 0));
    }
}

#[test]
fn zero_step_size_keeps_the_table_empty() {
    let env = env_from(TableDynamics::random(3, 1), 4, 1.0);
    let config = TrainConfig {
        episodes: 100,
        alpha: 0.0,
        ..TrainConfig::default()
    };
    assert!(sarsa_train(&env, &config).unwrap().values().iter().all(|v| *v == 0.0));
    assert!(q_learning_train(&env, &config).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn tabular_methods_reject_full_history() {
    struct Fh(TableDynamics);
    impl crate::env::Dynamics for Fh {
        fn catalog(&self) -> &[JobId] {
            self.0.catalog()
        }
        fn representation(&self) -> StateRepresentation {
            StateRepresentation::FullHistory
        }
        fn hire_probability(&self, s: &crate::env::State, a: usize) -> f64 {
            self.0.hire_probability(s, a)
        }
        fn annual_salary(&self, j: usize) -> f64 {
            self.0.annual_salary(j)
        }
    }
    let env = Env::new(EnvConfig::default(), Arc::new(Fh(TableDynamics::random(2, 0))));
    assert_eq!(sarsa_train(&env, &TrainConfig::default()), Err(AgentError::FullHistoryTabular));
    assert_eq!(q_learning_train(&env, &TrainConfig::default()), Err(AgentError::FullHistoryTabular));
}

#[test]
fn deterministic_chain_matches_reward_to_go() {
    // Every application succeeds; Q-learning must recover the exact
    // backward-induction values.
    let d = TableDynamics::uniform(catalog(3), 1.0, vec![40_000.0, 80_000.0, 20_000.0]).unwrap();
    let env = env_from(d, 4, 0.9);
    let q = q_learning_train(&env, &oracle_config(3)).unwrap();
    let sol = value_iteration_oracle(&ExplicitMdp::from_env(&env).unwrap()).unwrap();
    assert!(q_gap(&q, &sol) < 1e-3, "{}", q_gap(&q, &sol));
    // Hand-rolled: from anywhere, move to job 1 and stay; reward 20,000 per step.
    let expected: f64 = (0..4).map(|k| 20_000.0 * 0.9f64.powi(k)).sum();
    assert!((sol.value(0, 0) - expected).abs() < 1e-9);
}

#[test]
fn myopic_learning_recovers_expected_immediate_reward() {
    let d = TableDynamics::random(3, 7);
    let env = env_from(d.clone(), 4, 0.0);
    let q = q_learning_train(&env, &TrainConfig {
        key: TabularKey::Job,
        ..oracle_config(7)
    })
    .unwrap();
    for s in 0..3 {
        for a in 0..3 {
            let p = d.probability(s, a);
            let expected = p * env.step_salary(a) + (1.0 - p) * env.step_salary(s);
            let got = q.get(s, 0, a);
            assert!((got - expected).abs() <= 0.02 * expected, "{s},{a}: {got} vs {expected}");
        }
    }
}

#[test]
fn tabular_learners_match_the_value_iteration_policy() {
    for seed in [11, 12] {
        let (env, sol) = crate::eval::separated_random_env(3, 4, 0.02, seed);
        let tol = 0.05 * sol.max_abs_q();
        let q = q_learning_train(&env, &oracle_config(seed)).unwrap();
        assert!(greedy_is_optimal(&q, &sol), "q-learning seed {seed}");
        assert!(q_gap(&q, &sol) <= tol, "q-learning seed {seed}: {}", q_gap(&q, &sol));
        let q = sarsa_train(&env, &oracle_config(seed)).unwrap();
        assert!(greedy_is_optimal(&q, &sol), "sarsa seed {seed}");
        assert!(q_gap(&q, &sol) <= tol, "sarsa seed {seed}: {}", q_gap(&q, &sol));
    }
}

#[test]
fn random_behaviour_separates_on_and_off_policy() {
    let (env, _) = crate::eval::separated_random_env(3, 4, 0.02, 21);
    let mdp = ExplicitMdp::from_env(&env).unwrap();
    let optimal = value_iteration_oracle(&mdp).unwrap();
    let uniform = policy_evaluation_oracle(&mdp, |_, _| (0..3).map(|a| (a, 1.0 / 3.0)).collect()).unwrap();
    let config = TrainConfig {
        epsilon: EpsilonSchedule::constant(1.0),
        ..oracle_config(21)
    };
    let tol = 0.05 * optimal.max_abs_q();
    let q = q_learning_train(&env, &config).unwrap();
    assert!(greedy_is_optimal(&q, &optimal));
    assert!(q_gap(&q, &optimal) <= tol);
    assert!(q_gap(&q, &uniform) > 2.0 * tol);
    let q = sarsa_train(&env, &config).unwrap();
    assert!(q_gap(&q, &uniform) <= tol);
    assert!(q_gap(&q, &optimal) > 2.0 * tol);
}

#[test]
fn tabular_training_is_reproducible() {
    let env = env_from(TableDynamics::random(4, 2), 6, 1.0);
    let config = TrainConfig {
        episodes: 500,
        seed: 9,
        ..TrainConfig::default()
    };
    assert_eq!(sarsa_train(&env, &config).unwrap(), sarsa_train(&env, &config).unwrap());
    assert_eq!(q_learning_train(&env, &config).unwrap(), q_learning_train(&env, &config).unwrap());
    let other = TrainConfig { seed: 10, ..config.clone() };
    assert_ne!(q_learning_train(&env, &config).unwrap(), q_learning_train(&env, &other).unwrap());
}

#[test]
fn q_table_reads_default_to_zero_and_round_trip() {
    let mut q = QTable::new(TabularKey::Job, 3, 40);
    assert_eq!(q.get(2, 7, 1), 0.0);
    q.set(2, 0, 1, 5.0);
    assert_eq!(q.get(2, 39, 1), 5.0);
    assert_eq!(q.values().len(), 9);
    let back = QTable::from_values(q.key(), 3, 40, q.values().to_vec()).unwrap();
    assert_eq!(back, q);
    assert!(QTable::from_values(TabularKey::Job, 3, 40, vec![0.0; 8]).is_err());
    // Steps beyond the horizon reuse the last row.
    let mut q = QTable::new(TabularKey::JobAndStep, 2, 4);
    q.set(1, 3, 0, 2.0);
    assert_eq!(q.get(1, 10, 0), 2.0);
}

#[test]
fn replay_buffer_is_fifo_and_bounded() {
    let mut buf = ReplayBuffer::new(3);
    for i in 0..5 {
        buf.push(Transition {
            state: vec![i as f32],
            action: i,
            reward: 0.0,
            next_state: vec![],
            done: false,
        });
        assert!(buf.len() <= 3);
    }
    let kept: Vec<usize> = (0..3).map(|i| buf.get(i).unwrap().action).collect();
    assert_eq!(kept, vec![2, 3, 4]);
    let mut rng = rng_from_seed(0);
    let mut batch: Vec<usize> = buf.sample(3, &mut rng).into_iter().map(|t| t.action).collect();
    batch.sort();
    assert_eq!(batch, vec![2, 3, 4]);
}

fn quick_dqn(seed: u64) -> DqnConfig {
    DqnConfig {
        episodes: 3_000,
        hidden: vec![32, 32],
        learning_rate: 2e-3,
        target_sync: 100,
        learning_starts: 200,
        seed,
        ..DqnConfig::default()
    }
}

#[test]
fn dqn_target_sync_of_one_tracks_every_update() {
    let env = env_from(TableDynamics::random(3, 4), 4, 1.0);
    let config = DqnConfig {
        episodes: 50,
        target_sync: 1,
        learning_starts: 10,
        ..quick_dqn(1)
    };
    let (_, stats) = dqn_train(&env, &config, &[]).unwrap();
    assert!(stats.updates > 0);
    assert_eq!(stats.updates, stats.target_syncs);
    assert_eq!(stats.transitions, 200);
}

#[test]
fn dqn_is_reproducible() {
    let env = env_from(TableDynamics::random(3, 4), 4, 1.0);
    let config = DqnConfig { episodes: 60, learning_starts: 20, ..quick_dqn(5) };
    assert_eq!(dqn_train(&env, &config, &[]).unwrap().0, dqn_train(&env, &config, &[]).unwrap().0);
}

#[test]
fn dqn_learns_a_tiny_mdp() {
    let (env, sol) = crate::eval::separated_random_env(3, 4, 0.02, 31);
    let (policy, _) = dqn_train(&env, &quick_dqn(31), &[]).unwrap();
    let mut misses = 0;
    for t in 0..4 {
        for s in 0..3 {
            let state = crate::env::State {
                current: s,
                history: vec![crate::env::HeldJob { job: env.job(s), months: 0 }],
                t,
                since: 0,
            };
            let greedy = argmax_set(&policy.q_values(&state));
            if greedy != sol.optimal_actions(t as usize, s, 0.0) {
                misses += 1;
            }
        }
    }
    assert_eq!(misses, 0);
}

#[test]
fn a2c_keeps_a_normalised_actor_and_values_a_fixed_policy() {
    // One job, one action: the only policy earns 1 per step, so the critic
    // (on the rescaled reward) should approach the remaining step count.
    let d = TableDynamics::uniform(catalog(1), 1.0, vec![4.0]).unwrap();
    let env = env_from(d, 5, 1.0);
    let config = A2cConfig {
        episodes: 8_000,
        hidden: vec![16, 16],
        critic_learning_rate: 3e-4,
        seed: 3,
        ..A2cConfig::default()
    };
    let (policy, stats) = a2c_train(&env, &config, &[]).unwrap();
    assert!(stats.max_normalisation_error <= 1e-9);
    for t in 0..5u32 {
        let state = crate::env::State {
            current: 0,
            history: vec![crate::env::HeldJob { job: env.job(0), months: 0 }],
            t,
            since: 0,
        };
        let probs = policy.probabilities(&state);
        assert_eq!(probs, vec![1.0]);
        let v = policy.value(&state);
        let truth = f64::from(5 - t);
        assert!((v - truth).abs() <= 0.05 * truth, "t={t}: {v} vs {truth}");
    }
}

fn fixed_env(probs_from_zero: &[f64], annual: Vec<f64>) -> Env {
    let n = probs_from_zero.len();
    let mut probs = vec![0.5; n * n];
    probs[..n].copy_from_slice(probs_from_zero);
    env_from(TableDynamics::new(catalog(n as u16), probs, annual).unwrap(), 40, 1.0)
}

#[test]
fn most_common_takes_the_likeliest_job() {
    let env = fixed_env(&[0.9, 0.1], vec![10.0, 10.0]);
    let s = env.reset(env.job(0)).unwrap();
    let mut rng = rng_from_seed(0);
    for _ in 0..20 {
        assert_eq!(baseline_most_common(&env, &s, &mut rng), 0);
    }
}

#[test]
fn most_common_breaks_ties_uniformly() {
    let env = fixed_env(&[0.4; 5], vec![10.0; 5]);
    let s = env.reset(env.job(0)).unwrap();
    let mut rng = rng_from_seed(1);
    let n = 10_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        counts[GreedyMostCommon::new().act(&env, &s, &mut rng)] += 1;
    }
    let expected = n as f64 / 5.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 4 degrees of freedom.
    assert!(chi2 < 18.47, "{counts:?} chi2={chi2}");
}

#[test]
fn highest_expected_reward_uses_probability_times_salary() {
    let env = fixed_env(&[0.5, 0.9], vec![50_000.0, 30_000.0]);
    let s = env.reset(env.job(0)).unwrap();
    let mut rng = rng_from_seed(2);
    assert_eq!(baseline_highest_expected_reward(&env, &s, &mut rng), 1);
    assert_eq!(GreedyHighestExpectedReward::new().scores(&env, &s), vec![6_250.0, 6_750.0]);
}

#[test]
fn uniform_salaries_make_both_baselines_agree() {
    let env = fixed_env(&[0.2, 0.7, 0.3, 0.6], vec![45_000.0; 4]);
    let s = env.reset(env.job(0)).unwrap();
    assert_eq!(
        GreedyMostCommon::new().action_distribution(&env, &s),
        GreedyHighestExpectedReward::new().action_distribution(&env, &s)
    );
}

#[test]
fn replay_policy_follows_its_sequence() {
    let env = fixed_env(&[1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]);
    let policy = ReplayPolicy::new(vec![2, 1]);
    let ep = env.with_horizon(3).rollout(&policy, env.job(0), &mut rng_from_seed(0)).unwrap();
    let jobs: Vec<JobId> = ep.steps.iter().map(|s| s.next_job).collect();
    assert_eq!(jobs, vec![env.job(2), env.job(1), env.job(1)]);
}

#[test]
fn epsilon_schedule_decays_linearly() {
    let e = EpsilonSchedule::default();
    assert_eq!(e.at(0, 100), 1.0);
    assert!((e.at(40, 100) - 0.525).abs() < 1e-12);
    assert_eq!(e.at(80, 100), 0.05);
    assert_eq!(e.at(99, 100), 0.05);
    assert!(EpsilonSchedule { start: 1.5, ..e }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_follows_permutations(scores in prop::collection::vec(0.0f64..1.0, 1..12), seed in 0u64..1000) {
        let mut perm: Vec<usize> = (0..scores.len()).collect();
        let mut rng = rng_from_seed(seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let permuted: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let mut mapped: Vec<usize> = argmax_set(&permuted).into_iter().map(|i| perm[i]).collect();
        mapped.sort();
        prop_assert_eq!(mapped, argmax_set(&scores));
    }

    #[test]
    fn argmax_ignores_positive_rescaling(scores in prop::collection::vec(0.0f64..1.0, 1..12), k in -8i32..8) {
        let c = 2f64.powi(k);
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        prop_assert_eq!(argmax_set(&scaled), argmax_set(&scores));
    }
}
