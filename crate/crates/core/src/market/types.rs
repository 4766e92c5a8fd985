use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// An occupation code paired with an industry code.
///
/// Ordering is occupation-major, which is what deterministic tie-breaking
/// throughout the crate relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobId {
    pub occupation: u16,
    pub industry: u16,
}

impl JobId {
    pub const fn new(occupation: u16, industry: u16) -> Self {
        Self {
            occupation,
            industry,
        }
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.occupation, self.industry)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EmployeeId(pub String);

impl fmt::Display for EmployeeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EmployeeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkExperienceRecord {
    pub employee_id: EmployeeId,
    pub job: JobId,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl WorkExperienceRecord {
    pub fn duration_days(&self) -> i64 {
        (self.end_date - self.start_date).num_days()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vacancy {
    pub job: JobId,
    pub annual_salary_eur: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Hired,
    Rejected,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Hired => "hired",
            Outcome::Rejected => "rejected",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationRecord {
    pub candidate_id: EmployeeId,
    pub application_date: NaiveDate,
    pub target_job: JobId,
    pub outcome: Outcome,
}

/// The three input tables plus the catalog of every job they mention.
///
/// Employees flagged in `incomplete_employees` had at least one row with a
/// missing required field; those rows are not materialised as records and the
/// employee is dropped entirely by [`preprocess`](super::preprocess).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarketDataset {
    pub experiences: Vec<WorkExperienceRecord>,
    pub vacancies: Vec<Vacancy>,
    pub applications: Vec<ApplicationRecord>,
    pub job_catalog: Vec<JobId>,
    pub incomplete_employees: BTreeSet<EmployeeId>,
}

impl MarketDataset {
    /// Builds a dataset, grouping experiences per employee (first-appearance
    /// order) sorted by start date, and deriving the job catalog.
    pub fn new(
        experiences: Vec<WorkExperienceRecord>,
        vacancies: Vec<Vacancy>,
        applications: Vec<ApplicationRecord>,
        incomplete_employees: BTreeSet<EmployeeId>,
    ) -> Self {
        let experiences = group_sorted(experiences);
        let mut catalog: BTreeSet<JobId> = experiences.iter().map(|r| r.job).collect();
        catalog.extend(vacancies.iter().map(|v| v.job));
        catalog.extend(applications.iter().map(|a| a.target_job));
        Self {
            experiences,
            vacancies,
            applications,
            job_catalog: catalog.into_iter().collect(),
            incomplete_employees,
        }
    }

    /// Each employee's records, sorted by start date.
    pub fn histories(&self) -> BTreeMap<&EmployeeId, Vec<&WorkExperienceRecord>> {
        let mut map: BTreeMap<&EmployeeId, Vec<&WorkExperienceRecord>> = BTreeMap::new();
        for r in &self.experiences {
            map.entry(&r.employee_id).or_default().push(r);
        }
        for v in map.values_mut() {
            v.sort_by_key(|r| r.start_date);
        }
        map
    }

    pub fn employee_count(&self) -> usize {
        self.experiences
            .iter()
            .map(|r| &r.employee_id)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

fn group_sorted(records: Vec<WorkExperienceRecord>) -> Vec<WorkExperienceRecord> {
    let mut order: Vec<EmployeeId> = Vec::new();
    let mut groups: BTreeMap<EmployeeId, Vec<WorkExperienceRecord>> = BTreeMap::new();
    for r in records {
        if !groups.contains_key(&r.employee_id) {
            order.push(r.employee_id.clone());
        }
        groups.entry(r.employee_id.clone()).or_default().push(r);
    }
    let mut out = Vec::new();
    for id in order {
        let mut g = groups.remove(&id).unwrap_or_default();
        g.sort_by_key(|r| r.start_date);
        out.extend(g);
    }
    out
}
