//! Market data: work experience, vacancies and applications.

mod io;
mod plausible;
mod preprocess;
mod synth;
mod types;

pub use io::{
    load_applications, load_dataset, load_vacancies, load_work_experience, write_applications, APPLICATIONS_FILE, VACANCIES_FILE, WORK_EXPERIENCE_FILE,
    write_dataset, write_vacancies, write_work_experience, WorkExperienceTable,
};
pub use plausible::{plausible_jobs, PlausibleJobs, DEFAULT_PLAUSIBLE_JOBS};
pub use preprocess::{preprocess, MAX_RECORDS_PER_EMPLOYEE, MIN_DURATION_DAYS};
pub use synth::{generate_synthetic, top_decile_jobs, HireLogit, LogNormalTarget, SynthConfig, TargetMix};
pub use types::{
    ApplicationRecord, EmployeeId, JobId, MarketDataset, Outcome, Vacancy, WorkExperienceRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
