use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::market::{EmployeeId, JobId, MarketDataset, WorkExperienceRecord};
use crate::models::SalaryModel;

/// An observed career at calendar-month resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedPath {
    pub employee_id: EmployeeId,
    pub start_job: JobId,
    pub duration_months: u32,
    pub monthly_income: Vec<f64>,
    /// The job attributed to each month: the most recently started active
    /// job, or the carried job during gaps.
    pub monthly_jobs: Vec<JobId>,
}

fn month_index(d: NaiveDate) -> i64 {
    i64::from(d.year()) * 12 + i64::from(d.month0())
}

/// Month-by-month income from the first start month to the last end month.
///
/// A month in which several records are active earns the mean of their
/// monthly salaries; a month with no active record repeats the previous
/// month.
pub fn monthly_income_series(records: &[WorkExperienceRecord], salary: &SalaryModel) -> Result<ObservedPath, EvalError> {
    let mut sorted: Vec<&WorkExperienceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.start_date, r.end_date));
    let first = *sorted.first().ok_or(EvalError::EmptyRecords)?;
    let m0 = month_index(first.start_date);
    let m1 = sorted.iter().map(|r| month_index(r.end_date)).max().expect("nonempty");
    let n = (m1 - m0 + 1) as usize;

    let mut sums = vec![0.0; n];
    let mut counts = vec![0u32; n];
    let mut jobs: Vec<Option<(NaiveDate, JobId)>> = vec![None; n];
    for r in &sorted {
        let monthly = salary.monthly_salary(r.job);
        let a = (month_index(r.start_date) - m0) as usize;
        let b = (month_index(r.end_date) - m0) as usize;
        for m in a..=b {
            sums[m] += monthly;
            counts[m] += 1;
            if jobs[m].is_none_or(|(s, _)| r.start_date >= s) {
                jobs[m] = Some((r.start_date, r.job));
            }
        }
    }
    let mut monthly_income = Vec::with_capacity(n);
    let mut monthly_jobs = Vec::with_capacity(n);
    for m in 0..n {
        if counts[m] == 0 {
            // The first month always has an active record.
            let (inc, job) = (monthly_income[m - 1], monthly_jobs[m - 1]);
            monthly_income.push(inc);
            monthly_jobs.push(job);
        } else {
            monthly_income.push(if counts[m] == 1 { sums[m] } else { sums[m] / f64::from(counts[m]) });
            monthly_jobs.push(jobs[m].expect("active month").1);
        }
    }
    Ok(ObservedPath {
        employee_id: first.employee_id.clone(),
        start_job: first.job,
        duration_months: n as u32,
        monthly_income,
        monthly_jobs,
    })
}

/// Total observed income over the path.
pub fn factual_income(path: &ObservedPath) -> f64 {
    path.monthly_income.iter().sum()
}

/// One path per employee, in employee order.
pub fn observed_paths(dataset: &MarketDataset, salary: &SalaryModel) -> Vec<ObservedPath> {
    dataset
        .histories()
        .into_values()
        .filter_map(|recs| {
            let owned: Vec<WorkExperienceRecord> = recs.into_iter().cloned().collect();
            monthly_income_series(&owned, salary).ok()
        })
        .collect()
}
