//! Evaluation: factual and counterfactual income, policy comparison with a
//! permutation test, start/final job distributions and exact oracles for
//! small MDPs.

use thiserror::Error;

use crate::market::JobId;

mod compare;
mod distribution;
mod income;
mod oracle;
mod permutation;


pub use compare::{
    compare_policies, compare_policies_with, expected_income, generate_counterfactual, write_reports_csv,
    ComparisonReport, Counterfactual, EvalConfig, PathOutcome, REPORT_CSV_HEADER,
};
pub use distribution::{distribution_report, DistributionReport, StartDistribution, DEFAULT_TOP_JOBS};
pub use income::{factual_income, monthly_income_series, observed_paths, ObservedPath};
pub use oracle::{
    min_relative_action_gap, policy_evaluation_oracle, separated_random_env, value_iteration_oracle, ExplicitMdp,
    OracleSolution,
};
pub use permutation::{permutation_test, permutation_test_with, PermutationMode, TIE_TOLERANCE};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no work-experience records")]
    EmptyRecords,
    #[error("start job {0} is not in the catalog")]
    UnknownStart(JobId),
    #[error("no evaluable paths")]
    NoPaths,
    #[error("malformed MDP: {0}")]
    MalformedMdp(String),
    #[error("exact projection exceeded {0} distinct states")]
    StateCap(usize),
}
