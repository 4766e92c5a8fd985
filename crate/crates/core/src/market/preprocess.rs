use std::collections::{BTreeMap, BTreeSet};

use super::types::{EmployeeId, MarketDataset};

pub const MIN_DURATION_DAYS: i64 = 7;
pub const MAX_RECORDS_PER_EMPLOYEE: usize = 50;

/// Drops records shorter than a week, employees with missing data and
/// employees with more than fifty records. Everything else is kept as is, in
/// the same order. Vacancies and applications are left untouched.
pub fn preprocess(dataset: &MarketDataset) -> MarketDataset {
    let mut counts: BTreeMap<&EmployeeId, usize> = BTreeMap::new();
    for r in &dataset.experiences {
        *counts.entry(&r.employee_id).or_default() += 1;
    }
    let dropped: BTreeSet<&EmployeeId> = counts
        .iter()
        .filter(|(_, &n)| n > MAX_RECORDS_PER_EMPLOYEE)
        .map(|(e, _)| *e)
        .chain(dataset.incomplete_employees.iter())
        .collect();

    let experiences = dataset
        .experiences
        .iter()
        .filter(|r| !dropped.contains(&r.employee_id) && r.duration_days() >= MIN_DURATION_DAYS)
        .cloned()
        .collect();

    MarketDataset {
        experiences,
        vacancies: dataset.vacancies.clone(),
        applications: dataset.applications.clone(),
        job_catalog: dataset.job_catalog.clone(),
        incomplete_employees: BTreeSet::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{JobId, WorkExperienceRecord};
    use chrono::{Duration, NaiveDate};
    use proptest::prelude::*;

    fn rec(e: &str, start_offset: i64, days: i64) -> WorkExperienceRecord {
        let base = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let start = base + Duration::days(start_offset);
        WorkExperienceRecord {
            employee_id: e.into(),
            job: JobId::new(1, 1),
            start_date: start,
            end_date: start + Duration::days(days),
        }
    }

    fn dataset(records: Vec<WorkExperienceRecord>) -> MarketDataset {
        MarketDataset::new(records, vec![], vec![], BTreeSet::new())
    }

    #[test]
    fn fifty_one_records_removes_employee() {
        let mut records: Vec<_> = (0..51).map(|i| rec("big", i * 30, 20)).collect();
        records.push(rec("small", 0, 20));
        let out = preprocess(&dataset(records));
        assert!(out.experiences.iter().all(|r| r.employee_id.0 == "small"));
        assert_eq!(out.experiences.len(), 1);
    }

    #[test]
    fn fifty_records_is_kept() {
        let records: Vec<_> = (0..50).map(|i| rec("e", i * 30, 20)).collect();
        assert_eq!(preprocess(&dataset(records)).experiences.len(), 50);
    }

    #[test]
    fn six_day_record_removed_seven_kept() {
        let out = preprocess(&dataset(vec![rec("e", 0, 6), rec("e", 10, 7)]));
        assert_eq!(out.experiences.len(), 1);
        assert_eq!(out.experiences[0].duration_days(), 7);
    }

    #[test]
    fn incomplete_employee_removed() {
        let mut d = dataset(vec![rec("a", 0, 30), rec("b", 0, 30)]);
        d.incomplete_employees.insert("a".into());
        let out = preprocess(&d);
        assert_eq!(out.experiences.len(), 1);
        assert_eq!(out.experiences[0].employee_id.0, "b");
    }

    #[test]
    fn clean_dataset_unchanged() {
        let d = dataset(vec![rec("a", 0, 30), rec("a", 40, 90), rec("b", 5, 8)]);
        assert_eq!(preprocess(&d), d);
    }

    proptest! {
        #[test]
        fn idempotent(specs in proptest::collection::vec((0u8..4, 0i64..2000, 0i64..40), 0..120)) {
            let records = specs
                .iter()
                .map(|(e, s, d)| rec(&format!("e{e}"), *s, *d))
                .collect();
            let once = preprocess(&dataset(records));
            prop_assert_eq!(preprocess(&once), once.clone());
            prop_assert!(once.experiences.iter().all(|r| r.duration_days() >= MIN_DURATION_DAYS));
        }
    }
}
