//! Transition and reward models.
//!
//! The transition model is a random-forest classifier over encoded
//! (history, target job) pairs, trained on application outcomes. The reward
//! model is a random-forest regressor over (occupation, industry) trained on
//! vacancy salaries and materialised as a per-job annual salary table.

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{ForestClassifier, ForestError, ForestParams, ForestRegressor};
use crate::market::{JobId, MarketDataset, Outcome, Vacancy, WorkExperienceRecord};

/// Value of the recency feature when the target occupation was never held.
pub const NEVER_HELD_DAYS: f64 = 100_000.0;
pub const LAST_JOB_FEATURES: usize = 6;
pub const FULL_HISTORY_FEATURES: usize = 11;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("history is empty; the last-job representation needs a current job")]
    EmptyHistory,
    #[error("job {0} is not in the catalog")]
    UnknownJob(JobId),
    #[error("no vacancies to fit the salary model on")]
    EmptyVacancies,
    #[error("no usable applications to fit the transition model on")]
    EmptyTrainingSet,
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateRepresentation {
    LastJob,
    FullHistory,
}

impl StateRepresentation {
    pub fn n_features(self) -> usize {
        match self {
            StateRepresentation::LastJob => LAST_JOB_FEATURES,
            StateRepresentation::FullHistory => FULL_HISTORY_FEATURES,
        }
    }
}

/// One held job on a day axis (fractional days allowed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistorySpan {
    pub job: JobId,
    pub start_day: f64,
    pub end_day: f64,
}

/// A work history as seen at a reference day `now`; spans are in start order
/// and the last one is the current job.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CareerHistory {
    pub spans: Vec<HistorySpan>,
    pub now: f64,
}

fn day_number(d: NaiveDate) -> f64 {
    f64::from(d.num_days_from_ce())
}

impl CareerHistory {
    /// Builds a history from records sorted by start date. With a `cutoff`,
    /// only records starting strictly before it are kept and their ends are
    /// clipped to it; `now` is the cutoff (or the latest end date).
    pub fn from_records<'a, I>(records: I, cutoff: Option<NaiveDate>) -> Self
    where
        I: IntoIterator<Item = &'a WorkExperienceRecord>,
    {
        let mut spans = Vec::new();
        let mut latest = f64::NEG_INFINITY;
        for r in records {
            if cutoff.is_some_and(|c| r.start_date >= c) {
                continue;
            }
            let end = cutoff.map_or(r.end_date, |c| r.end_date.min(c));
            let span = HistorySpan {
                job: r.job,
                start_day: day_number(r.start_date),
                end_day: day_number(end),
            };
            latest = latest.max(span.end_day);
            spans.push(span);
        }
        let now = match cutoff {
            Some(c) => day_number(c),
            None if spans.is_empty() => 0.0,
            None => latest,
        };
        Self { spans, now }
    }

    pub fn current(&self) -> Option<JobId> {
        self.spans.last().map(|s| s.job)
    }
}

/// Encodes a (history, target) pair.
///
/// Last-job layout: current occupation, current industry, target occupation,
/// target industry, same-occupation flag, same-industry flag.
/// Full-history layout appends total tenure days, tenure days in the target
/// occupation, tenure days in the target industry, distinct jobs held and days
/// since the target occupation was last held ([`NEVER_HELD_DAYS`] if never).
/// Under the full-history layout an empty history encodes the current job as
/// -1/-1 with zero flags.
pub fn encode_history(
    history: &CareerHistory,
    target: JobId,
    repr: StateRepresentation,
) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::with_capacity(repr.n_features());
    encode_into(history, target, repr, &mut out)?;
    Ok(out)
}

pub(crate) fn encode_into(
    history: &CareerHistory,
    target: JobId,
    repr: StateRepresentation,
    out: &mut Vec<f64>,
) -> Result<(), ModelError> {
    out.clear();
    let current = history.current();
    if repr == StateRepresentation::LastJob && current.is_none() {
        return Err(ModelError::EmptyHistory);
    }
    match current {
        Some(c) => out.extend([
            f64::from(c.occupation),
            f64::from(c.industry),
            f64::from(target.occupation),
            f64::from(target.industry),
            f64::from(u8::from(c.occupation == target.occupation)),
            f64::from(u8::from(c.industry == target.industry)),
        ]),
        None => out.extend([
            -1.0,
            -1.0,
            f64::from(target.occupation),
            f64::from(target.industry),
            0.0,
            0.0,
        ]),
    }
    if repr == StateRepresentation::FullHistory {
        let (mut total, mut occ, mut ind) = (0.0, 0.0, 0.0);
        let mut last_occ_end: Option<f64> = None;
        let mut distinct: Vec<JobId> = Vec::new();
        for s in &history.spans {
            let days = (s.end_day - s.start_day).max(0.0);
            total += days;
            if s.job.occupation == target.occupation {
                occ += days;
                last_occ_end = Some(last_occ_end.map_or(s.end_day, |e: f64| e.max(s.end_day)));
            }
            if s.job.industry == target.industry {
                ind += days;
            }
            if !distinct.contains(&s.job) {
                distinct.push(s.job);
            }
        }
        let recency = last_occ_end.map_or(NEVER_HELD_DAYS, |e| (history.now - e).max(0.0));
        out.extend([total, occ, ind, distinct.len() as f64, recency]);
    }
    Ok(())
}

/// Encodes raw records (sorted by start date) against `target`, with `now` at
/// the latest end date.
pub fn encode_state_action(
    history: &[WorkExperienceRecord],
    target: JobId,
    repr: StateRepresentation,
) -> Result<Vec<f64>, ModelError> {
    encode_history(&CareerHistory::from_records(history, None), target, repr)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Applications whose candidate has no work-experience records at all.
    pub skipped_unknown_candidates: usize,
    /// Applications without prior history under the last-job representation.
    pub skipped_no_history: usize,
}

/// One row per application: the candidate's history strictly before the
/// application date, encoded against the target job; label 1 when hired.
pub fn build_transition_training_set(dataset: &MarketDataset, repr: StateRepresentation) -> TrainingSet {
    let histories = dataset.histories();
    let mut set = TrainingSet::default();
    let mut buf = Vec::new();
    for app in &dataset.applications {
        let Some(records) = histories.get(&app.candidate_id) else {
            set.skipped_unknown_candidates += 1;
            continue;
        };
        let history = CareerHistory::from_records(records.iter().copied(), Some(app.application_date));
        match encode_into(&history, app.target_job, repr, &mut buf) {
            Ok(()) => {
                set.rows.push(buf.clone());
                set.labels.push(if app.outcome == Outcome::Hired { 1.0 } else { 0.0 });
            }
            Err(_) => set.skipped_no_history += 1,
        }
    }
    if set.skipped_unknown_candidates > 0 || set.skipped_no_history > 0 {
        log::info!(
            "transition training set: {} rows, {} unknown candidates, {} without history",
            set.rows.len(),
            set.skipped_unknown_candidates,
            set.skipped_no_history
        );
    }
    set
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TransitionModelData {
    representation: StateRepresentation,
    catalog: Vec<JobId>,
    classifier: ForestClassifier,
}

/// Hire-probability estimator P(s'|s,a).
///
/// Under the last-job representation probabilities only depend on the
/// (current, target) pair, so they are precomputed for every catalog pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionModelData", into = "TransitionModelData")]
pub struct TransitionModel {
    representation: StateRepresentation,
    catalog: Vec<JobId>,
    classifier: ForestClassifier,
    index: HashMap<JobId, usize>,
    last_job_matrix: Vec<f64>,
}

impl TryFrom<TransitionModelData> for TransitionModel {
    type Error = ModelError;

    fn try_from(d: TransitionModelData) -> Result<Self, ModelError> {
        TransitionModel::from_parts(d.representation, d.catalog, d.classifier)
    }
}

impl From<TransitionModel> for TransitionModelData {
    fn from(m: TransitionModel) -> Self {
        Self {
            representation: m.representation,
            catalog: m.catalog,
            classifier: m.classifier,
        }
    }
}

impl TransitionModel {
    pub fn fit(
        dataset: &MarketDataset,
        catalog: &[JobId],
        repr: StateRepresentation,
        params: &ForestParams,
    ) -> Result<(Self, TrainingSet), ModelError> {
        let set = build_transition_training_set(dataset, repr);
        if set.rows.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let classifier = ForestClassifier::fit(&set.rows, &set.labels, params)?;
        Ok((Self::from_parts(repr, catalog.to_vec(), classifier)?, set))
    }

    pub fn from_parts(
        representation: StateRepresentation,
        catalog: Vec<JobId>,
        classifier: ForestClassifier,
    ) -> Result<Self, ModelError> {
        if catalog.is_empty() {
            return Err(ModelError::Malformed("empty catalog".into()));
        }
        if classifier.n_features != representation.n_features() || !classifier.is_well_formed() {
            return Err(ModelError::Malformed("classifier does not match the representation".into()));
        }
        let index: HashMap<JobId, usize> = catalog.iter().enumerate().map(|(i, j)| (*j, i)).collect();
        if index.len() != catalog.len() {
            return Err(ModelError::Malformed("duplicate catalog entries".into()));
        }
        let mut model = Self {
            representation,
            catalog,
            classifier,
            index,
            last_job_matrix: Vec::new(),
        };
        if representation == StateRepresentation::LastJob {
            let n = model.catalog.len();
            let mut matrix = vec![0.0; n * n];
            let mut buf = Vec::with_capacity(LAST_JOB_FEATURES);
            for (i, &from) in model.catalog.iter().enumerate() {
                let h = CareerHistory {
                    spans: vec![HistorySpan { job: from, start_day: 0.0, end_day: 0.0 }],
                    now: 0.0,
                };
                for (k, &to) in model.catalog.iter().enumerate() {
                    encode_into(&h, to, representation, &mut buf)?;
                    matrix[i * n + k] = model.classifier.predict_unchecked(&buf);
                }
            }
            model.last_job_matrix = matrix;
        }
        Ok(model)
    }

    pub fn representation(&self) -> StateRepresentation {
        self.representation
    }

    pub fn catalog(&self) -> &[JobId] {
        &self.catalog
    }

    pub fn classifier(&self) -> &ForestClassifier {
        &self.classifier
    }

    pub fn job_index(&self, job: JobId) -> Option<usize> {
        self.index.get(&job).copied()
    }

    /// Probability that applying to `action` from `history` succeeds.
    pub fn transition_probability(&self, history: &CareerHistory, action: JobId) -> Result<f64, ModelError> {
        let target = self.job_index(action).ok_or(ModelError::UnknownJob(action))?;
        if self.representation == StateRepresentation::LastJob {
            let current = history.current().ok_or(ModelError::EmptyHistory)?;
            if let Some(i) = self.job_index(current) {
                return Ok(self.last_job_matrix[i * self.catalog.len() + target]);
            }
        }
        let row = encode_history(history, action, self.representation)?;
        Ok(self.classifier.predict_unchecked(&row))
    }

    /// Same as [`transition_probability`](Self::transition_probability) on
    /// raw records, with `now` at the latest end date.
    pub fn probability_for_records(&self, records: &[WorkExperienceRecord], action: JobId) -> Result<f64, ModelError> {
        self.transition_probability(&CareerHistory::from_records(records, None), action)
    }

    /// Last-job lookup by catalog indices.
    #[inline]
    pub fn last_job_probability(&self, from: usize, to: usize) -> Option<f64> {
        self.last_job_matrix.get(from * self.catalog.len() + to).copied()
    }

    /// Probabilities of every catalog action from `history`.
    pub fn probabilities(&self, history: &CareerHistory) -> Result<Vec<f64>, ModelError> {
        if self.representation == StateRepresentation::LastJob {
            let current = history.current().ok_or(ModelError::EmptyHistory)?;
            if let Some(i) = self.job_index(current) {
                let n = self.catalog.len();
                return Ok(self.last_job_matrix[i * n..(i + 1) * n].to_vec());
            }
        }
        let mut buf = Vec::with_capacity(self.representation.n_features());
        self.catalog
            .iter()
            .map(|&a| {
                encode_into(history, a, self.representation, &mut buf)?;
                Ok(self.classifier.predict_unchecked(&buf))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalaryEntry {
    pub job: JobId,
    pub annual_salary_eur: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SalaryModelData {
    regressor: ForestRegressor,
    table: Vec<SalaryEntry>,
}

/// Per-job annual salary, materialised for the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SalaryModelData", into = "SalaryModelData")]
pub struct SalaryModel {
    regressor: ForestRegressor,
    table: Vec<SalaryEntry>,
    index: HashMap<JobId, usize>,
}

impl TryFrom<SalaryModelData> for SalaryModel {
    type Error = ModelError;

    fn try_from(d: SalaryModelData) -> Result<Self, ModelError> {
        if d.regressor.n_features != 2 || !d.regressor.is_well_formed() {
            return Err(ModelError::Malformed("salary regressor must take 2 features".into()));
        }
        if d.table.iter().any(|e| !(e.annual_salary_eur.is_finite() && e.annual_salary_eur > 0.0)) {
            return Err(ModelError::Malformed("salary table entries must be positive".into()));
        }
        let index = d.table.iter().enumerate().map(|(i, e)| (e.job, i)).collect();
        Ok(Self {
            regressor: d.regressor,
            table: d.table,
            index,
        })
    }
}

impl From<SalaryModel> for SalaryModelData {
    fn from(m: SalaryModel) -> Self {
        Self {
            regressor: m.regressor,
            table: m.table,
        }
    }
}

fn job_features(job: JobId) -> [f64; 2] {
    [f64::from(job.occupation), f64::from(job.industry)]
}

impl SalaryModel {
    pub fn fit(vacancies: &[Vacancy], catalog: &[JobId], params: &ForestParams) -> Result<Self, ModelError> {
        if vacancies.is_empty() {
            return Err(ModelError::EmptyVacancies);
        }
        let rows: Vec<Vec<f64>> = vacancies.iter().map(|v| job_features(v.job).to_vec()).collect();
        let targets: Vec<f64> = vacancies.iter().map(|v| v.annual_salary_eur).collect();
        let regressor = ForestRegressor::fit(&rows, &targets, params)?;
        let table = catalog
            .iter()
            .map(|&job| SalaryEntry {
                job,
                annual_salary_eur: regressor
                    .predict_value(&job_features(job))
                    .expect("two features"),
            })
            .collect();
        SalaryModel::try_from(SalaryModelData { regressor, table })
    }

    /// A model with a fixed table and no regressor fallback worth speaking
    /// of; used for hand-built environments.
    pub fn from_table(entries: &[(JobId, f64)]) -> Result<Self, ModelError> {
        let rows: Vec<Vec<f64>> = entries.iter().map(|(j, _)| job_features(*j).to_vec()).collect();
        let targets: Vec<f64> = entries.iter().map(|(_, s)| *s).collect();
        let params = ForestParams {
            n_trees: 1,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let regressor = ForestRegressor::fit(&rows, &targets, &params)?;
        let table = entries
            .iter()
            .map(|(job, s)| SalaryEntry {
                job: *job,
                annual_salary_eur: *s,
            })
            .collect();
        SalaryModel::try_from(SalaryModelData { regressor, table })
    }

    pub fn table(&self) -> &[SalaryEntry] {
        &self.table
    }

    pub fn table_map(&self) -> BTreeMap<JobId, f64> {
        self.table.iter().map(|e| (e.job, e.annual_salary_eur)).collect()
    }

    /// Annual salary: the table entry for catalog jobs, the regressor's
    /// prediction otherwise.
    pub fn annual_salary(&self, job: JobId) -> f64 {
        match self.index.get(&job) {
            Some(&i) => self.table[i].annual_salary_eur,
            None => self
                .regressor
                .predict_value(&job_features(job))
                .expect("two features"),
        }
    }

    pub fn in_table(&self, job: JobId) -> bool {
        self.index.contains_key(&job)
    }

    pub fn quarterly_salary(&self, job: JobId) -> f64 {
        self.annual_salary(job) / 4.0
    }

    pub fn monthly_salary(&self, job: JobId) -> f64 {
        self.annual_salary(job) / 12.0
    }
}
