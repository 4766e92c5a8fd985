//! Seeded synthetic market generator.
//!
//! Employees walk through careers: every job lasts a lognormal number of days,
//! after which the employee applies to a handful of targets (renewal, same
//! occupation, same industry or anywhere) until hired. Hire outcomes come
//! from a logistic ground truth over tenure in the target's occupation and
//! industry, total tenure and the target's salary level. Vacancy salaries are
//! lognormal with a per-job multiplicative offset.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::preprocess::MAX_RECORDS_PER_EMPLOYEE;
use super::types::{
    ApplicationRecord, EmployeeId, JobId, MarketDataset, Outcome, Vacancy, WorkExperienceRecord,
};
use super::MarketError;
use crate::rng::{rng_from_seed, SimRng};

/// A lognormal distribution pinned by its median and mean:
/// `mu = ln(median)`, `sigma^2 = 2 ln(mean / median)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalTarget {
    pub median: f64,
    pub mean: f64,
}

impl LogNormalTarget {
    pub fn new(median: f64, mean: f64) -> Result<Self, MarketError> {
        let t = Self { median, mean };
        t.validate("lognormal")?;
        Ok(t)
    }

    pub fn validate(&self, what: &str) -> Result<(), MarketError> {
        if !(self.median.is_finite() && self.mean.is_finite() && self.median > 0.0) {
            return Err(MarketError::InvalidConfig(format!(
                "{what}: median and mean must be positive and finite"
            )));
        }
        if self.mean < self.median {
            return Err(MarketError::InvalidConfig(format!(
                "{what}: mean {} is below median {}; a lognormal needs mean >= median",
                self.mean, self.median
            )));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.median.ln()
    }

    pub fn sigma(&self) -> f64 {
        (2.0 * (self.mean / self.median).ln()).sqrt()
    }

    pub fn distribution(&self) -> LogNormal<f64> {
        LogNormal::new(self.mu(), self.sigma()).expect("validated parameters")
    }
}

/// Logistic ground truth for application outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HireLogit {
    pub intercept: f64,
    pub occupation_tenure_per_year: f64,
    pub industry_tenure_per_year: f64,
    pub total_tenure_per_year: f64,
    /// Coefficient on the target job's standardized log-salary offset.
    pub salary_level: f64,
}

impl Default for HireLogit {
    fn default() -> Self {
        Self {
            intercept: -6.0,
            occupation_tenure_per_year: 3.0,
            industry_tenure_per_year: 3.0,
            total_tenure_per_year: 0.05,
            salary_level: -0.5,
        }
    }
}

impl HireLogit {
    pub fn probability(&self, occ_years: f64, ind_years: f64, total_years: f64, level: f64) -> f64 {
        let z = self.intercept
            + self.occupation_tenure_per_year * occ_years
            + self.industry_tenure_per_year * ind_years
            + self.total_tenure_per_year * total_years
            + self.salary_level * level;
        1.0 / (1.0 + (-z).exp())
    }
}

/// Relative weights of the kinds of application targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetMix {
    pub renewal: f64,
    pub same_occupation: f64,
    pub same_industry: f64,
    pub anywhere: f64,
}

impl Default for TargetMix {
    fn default() -> Self {
        Self {
            renewal: 0.3,
            same_occupation: 0.35,
            same_industry: 0.3,
            anywhere: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_employees: usize,
    pub n_occupations: u16,
    pub n_industries: u16,
    pub duration_days: LogNormalTarget,
    pub salary_eur: LogNormalTarget,
    /// Share of the log-salary variance that sits between jobs.
    pub salary_job_share: f64,
    pub mean_records_per_employee: f64,
    pub max_records_per_employee: usize,
    pub vacancies_per_employee: f64,
    /// Zipf exponent of job popularity.
    pub popularity_exponent: f64,
    pub max_applications_per_move: usize,
    pub hire: HireLogit,
    pub targets: TargetMix,
    /// Fraction of employees with a missing required field.
    pub missing_data_rate: f64,
    /// Fraction of hires into top-salary-decile jobs whose prior history is
    /// dropped from the data.
    pub senior_missing_history_bias: f64,
    pub first_start: NaiveDate,
    pub start_window_days: i64,
    /// Supplied by the caller at run time; not part of the serialised form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_employees: 5000,
            n_occupations: 16,
            n_industries: 12,
            duration_days: LogNormalTarget {
                median: 95.0,
                mean: 161.0,
            },
            salary_eur: LogNormalTarget {
                median: 38_000.0,
                mean: 42_000.0,
            },
            salary_job_share: 0.2,
            mean_records_per_employee: 4.0,
            max_records_per_employee: MAX_RECORDS_PER_EMPLOYEE,
            vacancies_per_employee: 6.0,
            popularity_exponent: 0.8,
            max_applications_per_move: 4,
            hire: HireLogit::default(),
            targets: TargetMix::default(),
            missing_data_rate: 0.01,
            senior_missing_history_bias: 0.0,
            first_start: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            start_window_days: 8 * 365,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: &str| Err(MarketError::InvalidConfig(m.to_owned()));
        if self.n_employees == 0 || self.n_occupations == 0 || self.n_industries == 0 {
            return bad("n_employees, n_occupations and n_industries must be positive");
        }
        self.duration_days.validate("duration_days")?;
        self.salary_eur.validate("salary_eur")?;
        if !(0.0..=1.0).contains(&self.salary_job_share) {
            return bad("salary_job_share must be in [0,1]");
        }
        if !(1.0..).contains(&self.mean_records_per_employee) {
            return bad("mean_records_per_employee must be >= 1");
        }
        if self.max_records_per_employee == 0
            || self.max_records_per_employee > MAX_RECORDS_PER_EMPLOYEE
        {
            return bad("max_records_per_employee must be in [1, 50]");
        }
        if !(self.vacancies_per_employee.is_finite() && self.vacancies_per_employee > 0.0)
            || !(0.0..).contains(&self.popularity_exponent)
        {
            return bad("vacancies_per_employee must be positive and popularity_exponent >= 0");
        }
        if self.max_applications_per_move == 0 {
            return bad("max_applications_per_move must be positive");
        }
        let t = &self.targets;
        let weights = [t.renewal, t.same_occupation, t.same_industry, t.anywhere];
        if weights.iter().any(|w| !(0.0..).contains(w)) || weights.iter().sum::<f64>() <= 0.0 {
            return bad("target mix weights must be nonnegative with a positive sum");
        }
        for (name, v) in [
            ("missing_data_rate", self.missing_data_rate),
            ("senior_missing_history_bias", self.senior_missing_history_bias),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MarketError::InvalidConfig(format!("{name} must be in [0,1]")));
            }
        }
        if self.start_window_days < 0 {
            return bad("start_window_days must be nonnegative");
        }
        Ok(())
    }
}

/// Per-job latent market structure shared by the generator's stages.
struct JobMarket {
    jobs: Vec<JobId>,
    popularity: Vec<f64>,
    /// Standardized log-salary offset per job.
    level: Vec<f64>,
    top_decile: Vec<bool>,
    n_industries: usize,
}

impl JobMarket {
    fn index(&self, job: JobId) -> usize {
        job.occupation as usize * self.n_industries + job.industry as usize
    }

    fn build(config: &SynthConfig, rng: &mut SimRng) -> Self {
        let jobs: Vec<JobId> = (0..config.n_occupations)
            .flat_map(|o| (0..config.n_industries).map(move |i| JobId::new(o, i)))
            .collect();
        let n = jobs.len();

        let mut ranks: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            ranks.swap(i, j);
        }
        let popularity: Vec<f64> = ranks
            .iter()
            .map(|&r| 1.0 / ((r + 1) as f64).powf(config.popularity_exponent))
            .collect();
        let total: f64 = popularity.iter().sum();
        let popularity: Vec<f64> = popularity.iter().map(|p| p / total).collect();

        // Standardize offsets under the vacancy mixture so the pooled salary
        // keeps the configured log-mean and log-variance.
        let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let w = vacancy_weights(&popularity);
        let mean: f64 = raw.iter().zip(&w).map(|(z, w)| z * w).sum();
        let var: f64 = raw.iter().zip(&w).map(|(z, w)| w * (z - mean).powi(2)).sum();
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        let level: Vec<f64> = raw.iter().map(|z| (z - mean) / sd).collect();

        let mut sorted = level.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let cutoff_rank = (n / 10).max(1) - 1;
        let cutoff = sorted[cutoff_rank];
        let top_decile = level.iter().map(|&l| l >= cutoff).collect();

        Self {
            jobs,
            popularity,
            level,
            top_decile,
            n_industries: config.n_industries as usize,
        }
    }
}

fn vacancy_weights(popularity: &[f64]) -> Vec<f64> {
    let n = popularity.len() as f64;
    popularity.iter().map(|p| 0.5 / n + 0.5 * p).collect()
}

#[derive(Clone, Copy)]
struct Span {
    job: JobId,
    start: NaiveDate,
    end: NaiveDate,
}

fn tenure_years(spans: &[Span], target: JobId, at: NaiveDate) -> (f64, f64, f64) {
    let (mut occ, mut ind, mut total) = (0.0, 0.0, 0.0);
    for s in spans.iter().filter(|s| s.start < at) {
        let days = (s.end.min(at) - s.start).num_days().max(0) as f64 / 365.25;
        total += days;
        if s.job.occupation == target.occupation {
            occ += days;
        }
        if s.job.industry == target.industry {
            ind += days;
        }
    }
    (occ, ind, total)
}

fn choose_target(
    market: &JobMarket,
    mix: &WeightedIndex<f64>,
    current: JobId,
    rng: &mut SimRng,
) -> JobId {
    let kind = mix.sample(rng);
    if kind == 0 {
        return current;
    }
    let candidates: Vec<usize> = market
        .jobs
        .iter()
        .enumerate()
        .filter(|(_, j)| {
            **j != current
                && match kind {
                    1 => j.occupation == current.occupation,
                    2 => j.industry == current.industry,
                    _ => true,
                }
        })
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return current;
    }
    let weights: Vec<f64> = candidates.iter().map(|&i| market.popularity[i]).collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    market.jobs[candidates[pick.sample(rng)]]
}

struct Career {
    spans: Vec<Span>,
    applications: Vec<ApplicationRecord>,
}

fn simulate_career(
    config: &SynthConfig,
    market: &JobMarket,
    id: &EmployeeId,
    start_pick: &WeightedIndex<f64>,
    mix: &WeightedIndex<f64>,
    durations: &LogNormal<f64>,
    rng: &mut SimRng,
) -> Career {
    let p_stop = 1.0 / config.mean_records_per_employee;
    let mut n_records = 1;
    while n_records < config.max_records_per_employee && rng.random::<f64>() >= p_stop {
        n_records += 1;
    }

    let mut current = market.jobs[start_pick.sample(rng)];
    let mut start = config.first_start + Duration::days(rng.random_range(0..=config.start_window_days));
    let mut spans = Vec::with_capacity(n_records);
    let mut applications = Vec::new();
    for k in 0..n_records {
        let days = durations.sample(rng).round().max(1.0) as i64;
        let end = start + Duration::days(days);
        spans.push(Span {
            job: current,
            start,
            end,
        });
        if k + 1 == n_records {
            break;
        }
        let applied_on = end;
        let mut next = current;
        for _ in 0..config.max_applications_per_move {
            let target = choose_target(market, mix, current, rng);
            let (occ, ind, total) = tenure_years(&spans, target, applied_on);
            let p = config
                .hire
                .probability(occ, ind, total, market.level[market.index(target)]);
            let hired = rng.random::<f64>() < p;
            applications.push(ApplicationRecord {
                candidate_id: id.clone(),
                application_date: applied_on,
                target_job: target,
                outcome: if hired { Outcome::Hired } else { Outcome::Rejected },
            });
            if hired {
                next = target;
                break;
            }
        }
        current = next;
        start = applied_on + Duration::days(rng.random_range(1..=14));
    }
    Career {
        spans,
        applications,
    }
}

/// Drops the candidate's footprint before a hire into a top-decile job, for a
/// `bias` fraction of such hires.
fn inject_missing_history(market: &JobMarket, career: &mut Career, bias: f64, rng: &mut SimRng) {
    let mut cut: Option<NaiveDate> = None;
    for a in &career.applications {
        if a.outcome == Outcome::Hired
            && market.top_decile[market.index(a.target_job)]
            && rng.random::<f64>() < bias
        {
            cut = Some(a.application_date);
        }
    }
    if let Some(date) = cut {
        career.spans.retain(|s| s.start >= date);
        // Rejections filed on the day of the hire belong to the same move and
        // go with the rest of the prior footprint.
        career.applications.retain(|a| {
            a.application_date > date || (a.application_date == date && a.outcome == Outcome::Hired)
        });
    }
}

/// Generates a complete market dataset. Deterministic for a fixed config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<MarketDataset, MarketError> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let market = JobMarket::build(config, &mut rng);
    let durations = config.duration_days.distribution();
    let start_pick = WeightedIndex::new(&market.popularity).expect("positive popularity");
    let t = &config.targets;
    let mix = WeightedIndex::new([t.renewal, t.same_occupation, t.same_industry, t.anywhere])
        .expect("validated weights");

    let mut experiences = Vec::new();
    let mut applications = Vec::new();
    let mut incomplete = BTreeSet::new();
    for e in 0..config.n_employees {
        let id = EmployeeId(format!("E{e:06}"));
        let mut career = simulate_career(
            config,
            &market,
            &id,
            &start_pick,
            &mix,
            &durations,
            &mut rng,
        );
        if config.senior_missing_history_bias > 0.0 {
            inject_missing_history(&market, &mut career, config.senior_missing_history_bias, &mut rng);
        }
        if rng.random::<f64>() < config.missing_data_rate {
            incomplete.insert(id.clone());
        }
        experiences.extend(career.spans.iter().map(|s| WorkExperienceRecord {
            employee_id: id.clone(),
            job: s.job,
            start_date: s.start,
            end_date: s.end,
        }));
        applications.extend(career.applications);
    }

    let n_vacancies = (config.vacancies_per_employee * config.n_employees as f64).round() as usize;
    let vacancy_pick = WeightedIndex::new(vacancy_weights(&market.popularity)).expect("weights");
    let between = config.salary_job_share.sqrt();
    let within = (1.0 - config.salary_job_share).sqrt();
    let (mu, sigma) = (config.salary_eur.mu(), config.salary_eur.sigma());
    let vacancies = (0..n_vacancies)
        .map(|_| {
            let j = vacancy_pick.sample(&mut rng);
            let noise: f64 = rng.sample(StandardNormal);
            Vacancy {
                job: market.jobs[j],
                annual_salary_eur: (mu + sigma * (between * market.level[j] + within * noise)).exp(),
            }
        })
        .collect();

    Ok(MarketDataset::new(experiences, vacancies, applications, incomplete))
}

/// The generator's top-salary-decile jobs for `config` (ground truth, for
/// diagnostics and tests).
pub fn top_decile_jobs(config: &SynthConfig) -> Vec<JobId> {
    let mut rng = rng_from_seed(config.seed);
    let market = JobMarket::build(config, &mut rng);
    market
        .jobs
        .iter()
        .zip(&market.top_decile)
        .filter(|(_, t)| **t)
        .map(|(j, _)| *j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_employees: 300,
            seed: 11,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthConfig { seed: 12, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn lognormal_parameters_solve_median_and_mean() {
        let t = LogNormalTarget::new(95.0, 161.0).unwrap();
        assert!((t.mu().exp() - 95.0).abs() < 1e-9);
        let mean = (t.mu() + t.sigma().powi(2) / 2.0).exp();
        assert!((mean - 161.0).abs() < 1e-9);
    }

    #[test]
    fn mean_below_median_rejected() {
        assert!(LogNormalTarget::new(100.0, 90.0).is_err());
        let cfg = SynthConfig {
            salary_eur: LogNormalTarget {
                median: 42_000.0,
                mean: 38_000.0,
            },
            ..small()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(MarketError::InvalidConfig(_))));
    }

    #[test]
    fn bias_outside_unit_interval_rejected() {
        let cfg = SynthConfig {
            senior_missing_history_bias: 1.5,
            ..small()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn without_bias_every_application_has_prior_history() {
        let d = generate_synthetic(&small()).unwrap();
        let histories = d.histories();
        for a in &d.applications {
            let h = &histories[&a.candidate_id];
            assert!(h.iter().any(|r| r.start_date < a.application_date));
        }
    }

    #[test]
    fn records_respect_cap_and_catalog() {
        let d = generate_synthetic(&small()).unwrap();
        for recs in d.histories().values() {
            assert!(recs.len() <= MAX_RECORDS_PER_EMPLOYEE);
            assert!(recs.iter().all(|r| r.start_date <= r.end_date));
        }
        let cat: BTreeSet<_> = d.job_catalog.iter().copied().collect();
        assert!(d.experiences.iter().all(|r| cat.contains(&r.job)));
        assert!(d.vacancies.iter().all(|v| cat.contains(&v.job)));
    }

    #[test]
    fn full_bias_strips_history_before_senior_hires() {
        let cfg = SynthConfig {
            senior_missing_history_bias: 1.0,
            ..small()
        };
        let top: BTreeSet<_> = top_decile_jobs(&cfg).into_iter().collect();
        let d = generate_synthetic(&cfg).unwrap();
        let histories = d.histories();
        let mut checked = 0;
        for a in d.applications.iter().filter(|a| a.outcome == Outcome::Hired) {
            if !top.contains(&a.target_job) {
                continue;
            }
            let prior = histories[&a.candidate_id]
                .iter()
                .filter(|r| r.start_date < a.application_date)
                .count();
            // only the last senior hire of a career is guaranteed to be stripped
            if prior == 0 {
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
