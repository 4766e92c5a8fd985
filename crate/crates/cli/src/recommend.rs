//! Career recommendations for a single work history.

use std::io::Write;
use std::path::Path;

use careerpath::env::{HeldJob, DAYS_PER_MONTH};
use careerpath::eval::expected_income;
use careerpath::market::{load_work_experience, WorkExperienceRecord};
use careerpath::rng::{indexed_seed, rng_from_seed};
use careerpath::{Env, JobId, Policy, State};
use serde::Serialize;

use crate::pipeline::{PipelineError, Result};

/// Largest number of distinct states tracked by the exact projection before
/// falling back to simulation.
pub const EXACT_STATE_CAP: usize = 200_000;
pub const SIMULATED_PROJECTION_RUNS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecommendationStep {
    pub step: u32,
    pub job: JobId,
    pub action: JobId,
    pub hire_probability: f64,
    /// Whether the application succeeds on the most likely realisation
    /// (probability at least one half).
    pub hired: bool,
    pub next_job: JobId,
    pub step_income_eur: f64,
    pub cumulative_income_eur: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Exact,
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recommendation {
    pub start_job: JobId,
    pub steps: Vec<RecommendationStep>,
    /// Income of the most likely path.
    pub path_income_eur: f64,
    /// Expected income under the learned hire probabilities.
    pub expected_income_eur: f64,
    pub projection: ProjectionMethod,
}

/// Converts one employee's records into held jobs, oldest first.
pub fn history_from_records(records: &[WorkExperienceRecord]) -> Result<Vec<HeldJob>> {
    let Some(first) = records.first() else {
        return Err(PipelineError::Input("history has no complete records".into()));
    };
    if records.iter().any(|r| r.employee_id != first.employee_id) {
        return Err(PipelineError::Input("history must describe a single employee".into()));
    }
    let mut sorted: Vec<&WorkExperienceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.start_date, r.end_date));
    Ok(sorted
        .into_iter()
        .map(|r| HeldJob {
            job: r.job,
            months: ((r.duration_days() as f64 / DAYS_PER_MONTH).round() as u32).max(1),
        })
        .collect())
}

pub fn load_history(path: &Path) -> Result<Vec<HeldJob>> {
    let table = load_work_experience(path)?;
    if !table.incomplete_employees.is_empty() {
        return Err(PipelineError::Input(format!(
            "{}: history has rows with missing fields",
            path.display()
        )));
    }
    history_from_records(&table.records)
}

fn mode(dist: &[(usize, f64)]) -> usize {
    // First of the most probable actions, so the trace is reproducible.
    let mut best = dist[0];
    for &(a, p) in &dist[1..] {
        if p > best.1 {
            best = (a, p);
        }
    }
    best.0
}

/// Greedy trace and income projection over `horizon` steps from `history`.
pub fn recommend(
    policy: &dyn Policy,
    env: &Env,
    history: Vec<HeldJob>,
    horizon: u32,
    seed: u64,
) -> Result<Recommendation> {
    let last = history.last().map(|h| h.job);
    let state = env.reset_with_history(history).map_err(|_| {
        PipelineError::Input(format!(
            "the last job in the history ({}) is outside the job catalog",
            last.map_or_else(|| "none".into(), |j| j.to_string())
        ))
    })?;
    let run_env = env.with_horizon(horizon);
    let start_job = run_env.job(state.current);

    let mut s = state.clone();
    let mut steps = Vec::with_capacity(horizon as usize);
    let mut total = 0.0;
    for step in 0..horizon {
        let action = mode(&policy.action_distribution(&run_env, &s));
        let p = run_env.hire_probability(&s, action);
        let job = run_env.job(s.current);
        let hired = p >= 0.5;
        let reward = run_env.advance(&mut s, action, hired);
        total += reward;
        steps.push(RecommendationStep {
            step,
            job,
            action: run_env.job(action),
            hire_probability: p,
            hired,
            next_job: run_env.job(s.current),
            step_income_eur: reward,
            cumulative_income_eur: total,
        });
    }

    let (expected, projection) = match expected_income(policy, &run_env, &state, horizon, EXACT_STATE_CAP) {
        Ok(v) => (v, ProjectionMethod::Exact),
        Err(_) => (simulate_income(policy, &run_env, &state, horizon, seed), ProjectionMethod::Simulated),
    };
    Ok(Recommendation {
        start_job,
        steps,
        path_income_eur: total,
        expected_income_eur: expected,
        projection,
    })
}

/// Mean income over seeded rollouts.
pub fn simulate_income(policy: &dyn Policy, env: &Env, state: &State, horizon: u32, seed: u64) -> f64 {
    let total: f64 = (0..SIMULATED_PROJECTION_RUNS)
        .map(|i| {
            let mut rng = rng_from_seed(indexed_seed(seed, i as u64));
            env.rollout_from(policy, state.clone(), horizon, &mut rng).total_reward()
        })
        .sum();
    total / SIMULATED_PROJECTION_RUNS as f64
}

pub const RECOMMENDATION_CSV_HEADER: [&str; 11] = [
    "step",
    "occupation",
    "industry",
    "action_occupation",
    "action_industry",
    "hire_probability",
    "hired",
    "next_occupation",
    "next_industry",
    "step_income_eur",
    "cumulative_income_eur",
];

pub fn write_recommendation_csv<W: Write>(writer: W, rec: &Recommendation) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECOMMENDATION_CSV_HEADER)?;
    for s in &rec.steps {
        w.write_record([
            s.step.to_string(),
            s.job.occupation.to_string(),
            s.job.industry.to_string(),
            s.action.occupation.to_string(),
            s.action.industry.to_string(),
            s.hire_probability.to_string(),
            s.hired.to_string(),
            s.next_job.occupation.to_string(),
            s.next_job.industry.to_string(),
            s.step_income_eur.to_string(),
            s.cumulative_income_eur.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A short plain-text account of the recommendation.
pub fn summary(rec: &Recommendation) -> String {
    let mut path = vec![rec.start_job];
    for s in &rec.steps {
        if s.next_job != *path.last().expect("nonempty") {
            path.push(s.next_job);
        }
    }
    let path: Vec<String> = path.iter().map(ToString::to_string).collect();
    let method = match rec.projection {
        ProjectionMethod::Exact => "exact",
        ProjectionMethod::Simulated => "simulated",
    };
    format!(
        "Recommended path over {} steps: {}\n\
         Income on the most likely path: {:.0} EUR\n\
         Expected income ({method}): {:.0} EUR\n",
        rec.steps.len(),
        path.join(" -> "),
        rec.path_income_eur,
        rec.expected_income_eur,
    )
}
