//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use careerpath::env::TableDynamics;
use careerpath::forest::ForestParams;
use careerpath::market::generate_synthetic;
use careerpath::models::{build_transition_training_set, TrainingSet};
use careerpath::{Env, EnvConfig, StateRepresentation, SynthConfig};

/// Application rows from a small synthetic market.
pub fn training_rows(n_employees: usize, repr: StateRepresentation) -> TrainingSet {
    let dataset = generate_synthetic(&SynthConfig {
        n_employees,
        seed: 3,
        ..SynthConfig::default()
    })
    .expect("valid config");
    build_transition_training_set(&dataset, repr)
}

pub fn forest_params(n_trees: usize) -> ForestParams {
    ForestParams {
        n_trees,
        seed: 5,
        ..ForestParams::default()
    }
}

/// A random explicit market with `n` jobs.
pub fn table_env(n: u16) -> Env {
    Env::new(EnvConfig::default(), Arc::new(TableDynamics::random(n, 9)))
}
