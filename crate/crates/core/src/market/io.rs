//! CSV ingestion and export for the three market tables.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::types::{
    ApplicationRecord, EmployeeId, JobId, MarketDataset, Outcome, Vacancy, WorkExperienceRecord,
};
use super::MarketError;

const WORK_COLUMNS: [&str; 5] = [
    "employee_id",
    "occupation_code",
    "industry_code",
    "start_date",
    "end_date",
];
const VACANCY_COLUMNS: [&str; 3] = ["occupation_code", "industry_code", "annual_salary_eur"];
const APPLICATION_COLUMNS: [&str; 5] = [
    "candidate_id",
    "application_date",
    "occupation_code",
    "industry_code",
    "outcome",
];

pub const WORK_EXPERIENCE_FILE: &str = "work_experience.csv";
pub const VACANCIES_FILE: &str = "vacancies.csv";
pub const APPLICATIONS_FILE: &str = "applications.csv";

/// Parsed work-experience file. Rows with an empty required cell are not
/// turned into records; their employee is listed in `incomplete_employees`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorkExperienceTable {
    pub records: Vec<WorkExperienceRecord>,
    pub incomplete_employees: BTreeSet<EmployeeId>,
}

struct Table {
    path: String,
    columns: Vec<usize>,
    reader: csv::Reader<Box<dyn Read>>,
}

impl Table {
    fn open(path: &Path, wanted: &[&str]) -> Result<Self, MarketError> {
        let file: Box<dyn Read> = Box::new(File::open(path)?);
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers()?.clone();
        let display = path.display().to_string();
        let columns = wanted
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == *c)
                    .ok_or_else(|| MarketError::MissingColumn {
                        path: display.clone(),
                        column: (*c).to_owned(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            path: display,
            columns,
            reader,
        })
    }

    /// Visits each row as (line number, cells in `wanted` order).
    fn for_each<F>(&mut self, mut f: F) -> Result<(), MarketError>
    where
        F: FnMut(u64, &[&str]) -> Result<(), String>,
    {
        let mut row = csv::StringRecord::new();
        while self.reader.read_record(&mut row)? {
            let line = row.position().map_or(0, |p| p.line());
            let cells: Vec<&str> = self
                .columns
                .iter()
                .map(|&i| row.get(i).unwrap_or(""))
                .collect();
            f(line, &cells).map_err(|message| MarketError::Parse {
                path: self.path.clone(),
                line,
                message,
            })?;
        }
        Ok(())
    }
}

fn parse_code(s: &str, what: &str) -> Result<u16, String> {
    s.parse::<u16>()
        .map_err(|_| format!("invalid {what} `{s}` (expected a nonnegative integer)"))
}

fn parse_date(s: &str, what: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| format!("invalid {what} `{s}` (expected YYYY-MM-DD)"))
}

pub fn load_work_experience(path: &Path) -> Result<WorkExperienceTable, MarketError> {
    let mut table = Table::open(path, &WORK_COLUMNS)?;
    let mut out = WorkExperienceTable::default();
    table.for_each(|_, cells| {
        if cells[0].is_empty() {
            return Err("empty employee_id".into());
        }
        let employee_id = EmployeeId(cells[0].to_owned());
        if cells[1..].iter().any(|c| c.is_empty()) {
            out.incomplete_employees.insert(employee_id);
            return Ok(());
        }
        let job = JobId::new(
            parse_code(cells[1], "occupation_code")?,
            parse_code(cells[2], "industry_code")?,
        );
        let start_date = parse_date(cells[3], "start_date")?;
        let end_date = parse_date(cells[4], "end_date")?;
        if end_date < start_date {
            return Err(format!(
                "end_date {end_date} is before start_date {start_date}"
            ));
        }
        out.records.push(WorkExperienceRecord {
            employee_id,
            job,
            start_date,
            end_date,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_vacancies(path: &Path) -> Result<Vec<Vacancy>, MarketError> {
    let mut table = Table::open(path, &VACANCY_COLUMNS)?;
    let mut out = Vec::new();
    table.for_each(|_, cells| {
        let job = JobId::new(
            parse_code(cells[0], "occupation_code")?,
            parse_code(cells[1], "industry_code")?,
        );
        let salary: f64 = cells[2]
            .parse()
            .map_err(|_| format!("invalid annual_salary_eur `{}`", cells[2]))?;
        if !(salary.is_finite() && salary > 0.0) {
            return Err(format!("annual_salary_eur must be positive, got {salary}"));
        }
        out.push(Vacancy {
            job,
            annual_salary_eur: salary,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_applications(path: &Path) -> Result<Vec<ApplicationRecord>, MarketError> {
    let mut table = Table::open(path, &APPLICATION_COLUMNS)?;
    let mut out = Vec::new();
    table.for_each(|_, cells| {
        if cells[0].is_empty() {
            return Err("empty candidate_id".into());
        }
        let outcome = match cells[4].to_ascii_lowercase().as_str() {
            "hired" => Outcome::Hired,
            "rejected" => Outcome::Rejected,
            other => return Err(format!("invalid outcome `{other}` (expected hired|rejected)")),
        };
        out.push(ApplicationRecord {
            candidate_id: EmployeeId(cells[0].to_owned()),
            application_date: parse_date(cells[1], "application_date")?,
            target_job: JobId::new(
                parse_code(cells[2], "occupation_code")?,
                parse_code(cells[3], "industry_code")?,
            ),
            outcome,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Writes the work-experience table. Incomplete employees get one extra row
/// with an empty industry code so that the flag survives a round trip.
pub fn write_work_experience<W: Write>(
    writer: W,
    records: &[WorkExperienceRecord],
    incomplete: &BTreeSet<EmployeeId>,
) -> Result<(), MarketError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(WORK_COLUMNS)?;
    for r in records {
        w.write_record([
            r.employee_id.0.clone(),
            r.job.occupation.to_string(),
            r.job.industry.to_string(),
            r.start_date.to_string(),
            r.end_date.to_string(),
        ])?;
    }
    for e in incomplete {
        w.write_record([e.0.as_str(), "0", "", "2000-01-01", "2000-01-02"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vacancies<W: Write>(writer: W, vacancies: &[Vacancy]) -> Result<(), MarketError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(VACANCY_COLUMNS)?;
    for v in vacancies {
        w.write_record([
            v.job.occupation.to_string(),
            v.job.industry.to_string(),
            v.annual_salary_eur.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_applications<W: Write>(
    writer: W,
    applications: &[ApplicationRecord],
) -> Result<(), MarketError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(APPLICATION_COLUMNS)?;
    for a in applications {
        w.write_record([
            a.candidate_id.0.clone(),
            a.application_date.to_string(),
            a.target_job.occupation.to_string(),
            a.target_job.industry.to_string(),
            a.outcome.as_str().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(dir: &Path, dataset: &MarketDataset) -> Result<(), MarketError> {
    std::fs::create_dir_all(dir)?;
    write_work_experience(
        File::create(dir.join(WORK_EXPERIENCE_FILE))?,
        &dataset.experiences,
        &dataset.incomplete_employees,
    )?;
    write_vacancies(File::create(dir.join(VACANCIES_FILE))?, &dataset.vacancies)?;
    write_applications(
        File::create(dir.join(APPLICATIONS_FILE))?,
        &dataset.applications,
    )?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<MarketDataset, MarketError> {
    let work = load_work_experience(&dir.join(WORK_EXPERIENCE_FILE))?;
    let vacancies = load_vacancies(&dir.join(VACANCIES_FILE))?;
    let applications = load_applications(&dir.join(APPLICATIONS_FILE))?;
    Ok(MarketDataset::new(
        work.records,
        vacancies,
        applications,
        work.incomplete_employees,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "employee_id,occupation_code,industry_code,start_date,end_date\n";

    #[test]
    fn three_rows_three_records_in_order() {
        let f = write_tmp(&format!(
            "{HEADER}e1,1,2,2020-01-01,2020-03-01\ne2,3,4,2020-02-01,2020-05-01\ne1,1,3,2020-03-05,2020-09-01\n"
        ));
        let t = load_work_experience(f.path()).unwrap();
        assert_eq!(t.records.len(), 3);
        assert_eq!(t.records[1].employee_id.0, "e2");
        assert_eq!(t.records[2].job, JobId::new(1, 3));
    }

    #[test]
    fn end_before_start_names_the_row() {
        let f = write_tmp(&format!(
            "{HEADER}e1,1,2,2020-01-01,2020-03-01\ne2,3,4,2020-05-01,2020-02-01\n"
        ));
        let err = load_work_experience(f.path()).unwrap_err();
        match err {
            MarketError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("before"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let f = write_tmp(HEADER);
        assert!(load_work_experience(f.path()).unwrap().records.is_empty());
    }

    #[test]
    fn missing_column_is_reported() {
        let f = write_tmp("employee_id,occupation_code,start_date,end_date\n");
        assert!(matches!(
            load_work_experience(f.path()),
            Err(MarketError::MissingColumn { column, .. }) if column == "industry_code"
        ));
    }

    #[test]
    fn empty_cell_marks_employee_incomplete() {
        let f = write_tmp(&format!(
            "{HEADER}e1,1,,2020-01-01,2020-03-01\ne1,1,2,2020-04-01,2020-06-01\n"
        ));
        let t = load_work_experience(f.path()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert!(t.incomplete_employees.contains(&EmployeeId::from("e1")));
    }

    #[test]
    fn bad_outcome_rejected() {
        let f = write_tmp(
            "candidate_id,application_date,occupation_code,industry_code,outcome\nc,2020-01-01,1,1,maybe\n",
        );
        assert!(matches!(
            load_applications(f.path()),
            Err(MarketError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn nonpositive_salary_rejected() {
        let f = write_tmp("occupation_code,industry_code,annual_salary_eur\n1,1,0\n");
        assert!(load_vacancies(f.path()).is_err());
    }
}
