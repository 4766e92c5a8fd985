use std::sync::Arc;

use careerpath::env::{HeldJob, TableDynamics};
use careerpath::{Env, EnvConfig, JobId, Policy, SimRng, State};
use careerpath_cli::recommend::{recommend, simulate_income, ProjectionMethod};

/// Always applies to one catalog index.
struct Apply(usize);

impl Policy for Apply {
    fn name(&self) -> &str {
        "apply"
    }

    fn action_distribution(&self, _env: &Env, _state: &State) -> Vec<(usize, f64)> {
        vec![(self.0, 1.0)]
    }

    fn act(&self, _env: &Env, _state: &State, _rng: &mut SimRng) -> usize {
        self.0
    }
}

fn table_env(catalog: Vec<JobId>, probs: Vec<f64>, annual: Vec<f64>) -> Env {
    let dynamics = TableDynamics::new(catalog, probs, annual).unwrap();
    Env::new(EnvConfig::default(), Arc::new(dynamics))
}

fn held(job: JobId, months: u32) -> Vec<HeldJob> {
    vec![HeldJob { job, months }]
}

#[test]
fn a_single_job_world_stays_put() {
    let job = JobId::new(4, 2);
    let env = table_env(vec![job], vec![1.0], vec![48_000.0]);
    let rec = recommend(&Apply(0), &env, held(job, 24), 40, 1).unwrap();
    assert_eq!(rec.steps.len(), 40);
    assert!(rec.steps.iter().all(|s| s.job == job && s.next_job == job));
    assert_eq!(rec.path_income_eur, 40.0 * 12_000.0);
    assert_eq!(rec.expected_income_eur, 40.0 * 12_000.0);
    assert_eq!(rec.projection, ProjectionMethod::Exact);
}

#[test]
fn a_job_outside_the_catalog_is_an_input_error() {
    let job = JobId::new(1, 1);
    let env = table_env(vec![job], vec![1.0], vec![30_000.0]);
    let err = recommend(&Apply(0), &env, held(JobId::new(9, 9), 3), 4, 1).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn the_path_follows_likely_hires_only() {
    let catalog = vec![JobId::new(1, 1), JobId::new(2, 2)];
    // 1 -> 2 succeeds with probability 0.3, so the most likely path stays.
    let env = table_env(catalog.clone(), vec![1.0, 0.3, 1.0, 1.0], vec![20_000.0, 80_000.0]);
    let rec = recommend(&Apply(1), &env, held(catalog[0], 6), 4, 1).unwrap();
    assert!(rec.steps.iter().all(|s| !s.hired && s.next_job == catalog[0]));
    assert_eq!(rec.path_income_eur, 4.0 * 5_000.0);
    assert!(rec.expected_income_eur > rec.path_income_eur);
}

#[test]
fn exact_projection_matches_simulation() {
    let catalog = vec![JobId::new(1, 1), JobId::new(2, 2), JobId::new(3, 3)];
    let probs = vec![1.0, 0.2, 0.1, 0.5, 1.0, 0.3, 0.4, 0.6, 1.0];
    let env = table_env(catalog.clone(), probs, vec![30_000.0, 55_000.0, 70_000.0]);
    for (target, seed) in [(1, 11), (2, 12)] {
        let rec = recommend(&Apply(target), &env, held(catalog[0], 12), 40, seed).unwrap();
        assert_eq!(rec.projection, ProjectionMethod::Exact);
        let state = env.reset_with_history(held(catalog[0], 12)).unwrap();
        let simulated = simulate_income(&Apply(target), &env, &state, 40, seed);
        let rel = (simulated - rec.expected_income_eur).abs() / rec.expected_income_eur;
        assert!(rel <= 0.02, "target {target}: exact {} simulated {simulated}", rec.expected_income_eur);
    }
}

#[test]
fn recommendations_are_deterministic() {
    let env = Env::new(EnvConfig::default(), Arc::new(TableDynamics::random(5, 8)));
    let start = env.job(2);
    let a = recommend(&Apply(4), &env, held(start, 9), 20, 5).unwrap();
    let b = recommend(&Apply(4), &env, held(start, 9), 20, 5).unwrap();
    assert_eq!(a, b);
}
