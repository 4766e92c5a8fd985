use std::collections::BTreeMap;

use super::types::{JobId, MarketDataset};

pub const DEFAULT_PLAUSIBLE_JOBS: usize = 142;

/// The most prevalent jobs, by number of work-experience records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlausibleJobs {
    pub jobs: Vec<JobId>,
    /// Set when fewer than `k` distinct jobs were available.
    pub truncated: bool,
}

/// Returns the `k` jobs with the most work-experience records, ordered by
/// count descending and then by [`JobId`] ascending.
pub fn plausible_jobs(dataset: &MarketDataset, k: usize) -> PlausibleJobs {
    assert!(k >= 1, "k must be positive");
    let mut counts: BTreeMap<JobId, usize> = BTreeMap::new();
    for r in &dataset.experiences {
        *counts.entry(r.job).or_default() += 1;
    }
    let mut ranked: Vec<(JobId, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let truncated = ranked.len() < k;
    if truncated {
        log::warn!("only {} distinct jobs available, {} requested", ranked.len(), k);
    }
    PlausibleJobs {
        jobs: ranked.into_iter().take(k).map(|(j, _)| j).collect(),
        truncated,
    }
}
