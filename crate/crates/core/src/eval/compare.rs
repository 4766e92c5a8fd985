use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::income::{factual_income, ObservedPath};
use super::permutation::permutation_test;
use super::EvalError;
use crate::agents::Policy;
use crate::env::{Env, Episode, HeldJob, State};
use crate::models::StateRepresentation;
use crate::rng::{child_seed, indexed_seed, rng_from_seed, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_sample: usize,
    pub n_permutations: usize,
    pub n_episodes_distribution: usize,
    /// Supplied by the caller at run time; not part of the serialised form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_sample: 20_000,
            n_permutations: 10_000,
            n_episodes_distribution: 1_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterfactual {
    pub cfi: f64,
    pub episode: Episode,
}

/// Follows `policy` from the path's first job for as many steps as needed to
/// cover its duration. Income is summed month by month, so a final partial
/// step pays only for the months it covers.
pub fn generate_counterfactual(
    policy: &dyn Policy,
    env: &Env,
    path: &ObservedPath,
    rng: &mut SimRng,
) -> Result<Counterfactual, EvalError> {
    let state = env.reset(path.start_job).map_err(|_| EvalError::UnknownStart(path.start_job))?;
    let months = path.duration_months;
    let step_months = env.config().step_months;
    let n_steps = months.div_ceil(step_months);
    let long_env;
    let run_env = if n_steps > env.horizon() {
        long_env = env.with_horizon(n_steps);
        &long_env
    } else {
        env
    };
    let episode = run_env.rollout_from(policy, state, n_steps, rng);
    let mut cfi = 0.0;
    for m in 0..months {
        let step = &episode.steps[(m / step_months) as usize];
        let job = env.job_index(step.next_job).expect("catalog job");
        cfi += env.monthly_salary(job);
    }
    Ok(Counterfactual { cfi, episode })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub path_index: usize,
    pub fi: f64,
    pub cfi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mean_fi_eur: f64,
    pub mean_cfi_eur: f64,
    pub change_pct: f64,
    pub p_value: f64,
    pub gainers_pct: f64,
    pub mean_gain_pct: f64,
    pub losers_pct: f64,
    pub mean_loss_pct: f64,
    pub n_paths: usize,
    /// Paths left out because their first job is outside the catalog.
    pub n_skipped: usize,
}

impl ComparisonReport {
    pub fn from_outcomes(outcomes: &[PathOutcome], p_value: f64, n_skipped: usize) -> Self {
        let n = outcomes.len();
        let nf = n as f64;
        let mean_fi = outcomes.iter().map(|o| o.fi).sum::<f64>() / nf;
        let mean_cfi = outcomes.iter().map(|o| o.cfi).sum::<f64>() / nf;
        let (mut gains, mut losses) = (Vec::new(), Vec::new());
        for o in outcomes {
            let pct = 100.0 * (o.cfi - o.fi) / o.fi;
            if o.cfi > o.fi {
                gains.push(pct);
            } else if o.cfi < o.fi {
                losses.push(pct);
            }
        }
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        Self {
            mean_fi_eur: mean_fi,
            mean_cfi_eur: mean_cfi,
            change_pct: 100.0 * (mean_cfi - mean_fi) / mean_fi,
            p_value,
            gainers_pct: 100.0 * gains.len() as f64 / nf,
            mean_gain_pct: mean(&gains),
            losers_pct: 100.0 * losses.len() as f64 / nf,
            mean_loss_pct: mean(&losses),
            n_paths: n,
            n_skipped,
        }
    }
}

pub const REPORT_CSV_HEADER: [&str; 11] = [
    "policy",
    "mean_fi_eur",
    "mean_cfi_eur",
    "change_pct",
    "p_value",
    "gainers_pct",
    "mean_gain_pct",
    "losers_pct",
    "mean_loss_pct",
    "n_paths",
    "n_skipped",
];

/// One CSV row per named report.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[(&str, &ComparisonReport)]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_CSV_HEADER)?;
    for (name, r) in reports {
        w.write_record([
            name.to_string(),
            r.mean_fi_eur.to_string(),
            r.mean_cfi_eur.to_string(),
            r.change_pct.to_string(),
            r.p_value.to_string(),
            r.gainers_pct.to_string(),
            r.mean_gain_pct.to_string(),
            r.losers_pct.to_string(),
            r.mean_loss_pct.to_string(),
            r.n_paths.to_string(),
            r.n_skipped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Compares `policy` against the observed paths.
pub fn compare_policies(
    policy: &dyn Policy,
    env: &Env,
    paths: &[ObservedPath],
    config: &EvalConfig,
) -> Result<(ComparisonReport, Vec<PathOutcome>), EvalError> {
    compare_policies_with(|_| policy, env, paths, config)
}

/// Like [`compare_policies`] with a policy built per path (e.g. a replay of
/// the observed jobs).
///
/// Paths whose first job is outside the catalog are skipped. If more than
/// `n_sample` paths remain, a seeded sample without replacement is used.
/// Each path gets its own random stream, so the result does not depend on
/// evaluation order.
pub fn compare_policies_with<F, P>(
    make_policy: F,
    env: &Env,
    paths: &[ObservedPath],
    config: &EvalConfig,
) -> Result<(ComparisonReport, Vec<PathOutcome>), EvalError>
where
    F: Fn(&ObservedPath) -> P + Sync,
    P: Policy,
{
    let eligible: Vec<usize> = (0..paths.len())
        .filter(|&i| env.job_index(paths[i].start_job).is_some())
        .collect();
    let n_skipped = paths.len() - eligible.len();
    if eligible.is_empty() {
        return Err(EvalError::NoPaths);
    }
    let chosen: Vec<usize> = if eligible.len() > config.n_sample {
        let mut rng = rng_from_seed(child_seed(config.seed, "sample"));
        let mut picks = sample(&mut rng, eligible.len(), config.n_sample).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| eligible[i]).collect()
    } else {
        eligible
    };
    let path_seed = child_seed(config.seed, "paths");
    let outcomes: Vec<PathOutcome> = chosen
        .par_iter()
        .map(|&i| {
            let path = &paths[i];
            let policy = make_policy(path);
            let mut rng = rng_from_seed(indexed_seed(path_seed, i as u64));
            let cf = generate_counterfactual(&policy, env, path, &mut rng).expect("eligible start job");
            PathOutcome {
                path_index: i,
                fi: factual_income(path),
                cfi: cf.cfi,
            }
        })
        .collect();
    let fi: Vec<f64> = outcomes.iter().map(|o| o.fi).collect();
    let cfi: Vec<f64> = outcomes.iter().map(|o| o.cfi).collect();
    let mut rng = rng_from_seed(child_seed(config.seed, "permutation"));
    let p = permutation_test(&fi, &cfi, config.n_permutations, &mut rng);
    Ok((ComparisonReport::from_outcomes(&outcomes, p, n_skipped), outcomes))
}

/// Exact expected income of `policy` over `n_steps` steps from `state`,
/// propagating the state distribution forward and merging identical states
/// (under the last-job representation only the current job and step count).
/// Fails once more than `state_cap` distinct states are live.
pub fn expected_income(
    policy: &dyn Policy,
    env: &Env,
    state: &State,
    n_steps: u32,
    state_cap: usize,
) -> Result<f64, EvalError> {
    let last_job = env.representation() == StateRepresentation::LastJob;
    let canonical = |mut s: State| {
        if last_job {
            s.history = vec![HeldJob {
                job: env.job(s.current),
                months: 0,
            }];
            s.since = 0;
        }
        s
    };
    let run_env = env.with_horizon(state.t + n_steps);
    let mut frontier: BTreeMap<State, f64> = BTreeMap::from([(canonical(state.clone()), 1.0)]);
    let mut total = 0.0;
    for _ in 0..n_steps {
        let mut next: BTreeMap<State, f64> = BTreeMap::new();
        for (s, mass) in frontier {
            for (action, pa) in policy.action_distribution(&run_env, &s) {
                let p = run_env.hire_probability(&s, action);
                for (hired, pr) in [(true, p), (false, 1.0 - p)] {
                    if pr <= 0.0 {
                        continue;
                    }
                    let mut s2 = s.clone();
                    let reward = run_env.advance(&mut s2, action, hired);
                    total += mass * pa * pr * reward;
                    *next.entry(canonical(s2)).or_insert(0.0) += mass * pa * pr;
                }
            }
        }
        if next.len() > state_cap {
            return Err(EvalError::StateCap(state_cap));
        }
        frontier = next;
    }
    Ok(total)
}
