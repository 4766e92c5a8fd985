use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::env::Env;
use crate::market::JobId;
use crate::rng::{indexed_seed, rng_from_seed};

pub const DEFAULT_TOP_JOBS: usize = 12;

/// Where distribution-report episodes start.
#[derive(Clone, Debug, PartialEq)]
pub enum StartDistribution {
    /// Uniform over the catalog.
    Uniform,
    /// Uniform over a list of start jobs, so repeated entries weigh more.
    /// Jobs outside the catalog are ignored; if none remain, starts are
    /// uniform over the catalog.
    Empirical(Vec<JobId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub n_episodes: usize,
    /// Job counts at t = 0, most frequent first (ties by job order).
    pub start: Vec<(JobId, usize)>,
    /// Job counts after the last step.
    pub final_counts: Vec<(JobId, usize)>,
}

fn ranked(counts: BTreeMap<JobId, usize>) -> Vec<(JobId, usize)> {
    let mut v: Vec<(JobId, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

impl DistributionReport {
    /// Share of final-state mass on `job`.
    pub fn final_share(&self, job: JobId) -> f64 {
        let c = self.final_counts.iter().find(|(j, _)| *j == job).map_or(0, |(_, c)| *c);
        c as f64 / self.n_episodes as f64
    }

    /// Writes the `top` most frequent jobs of both tables as CSV.
    pub fn write_csv<W: Write>(&self, writer: W, top: usize) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["position", "occupation", "industry", "count"])?;
        for (label, table) in [("start", &self.start), ("final", &self.final_counts)] {
            for (job, count) in table.iter().take(top) {
                w.write_record([
                    label.to_string(),
                    job.occupation.to_string(),
                    job.industry.to_string(),
                    count.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `n_episodes` full-horizon episodes and tabulates start and final
/// jobs. Each episode has its own seeded stream.
pub fn distribution_report(
    policy: &dyn Policy,
    env: &Env,
    starts: &StartDistribution,
    n_episodes: usize,
    seed: u64,
) -> DistributionReport {
    let empirical: Vec<JobId> = match starts {
        StartDistribution::Uniform => Vec::new(),
        StartDistribution::Empirical(jobs) => jobs.iter().copied().filter(|j| env.job_index(*j).is_some()).collect(),
    };
    let pairs: Vec<(JobId, JobId)> = (0..n_episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = rng_from_seed(indexed_seed(seed, e as u64));
            let start = if empirical.is_empty() {
                env.job(rng.random_range(0..env.n_actions()))
            } else {
                empirical[rng.random_range(0..empirical.len())]
            };
            let episode = env.rollout(policy, start, &mut rng).expect("catalog start job");
            (start, episode.final_job())
        })
        .collect();
    let mut start = BTreeMap::new();
    let mut fin = BTreeMap::new();
    for (s, f) in pairs {
        *start.entry(s).or_insert(0) += 1;
        *fin.entry(f).or_insert(0) += 1;
    }
    DistributionReport {
        n_episodes,
        start: ranked(start),
        final_counts: ranked(fin),
    }
}
