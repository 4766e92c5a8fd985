use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{Env, State};
use crate::market::JobId;
use crate::models::StateRepresentation;

/// Network input encoding.
///
/// Both layouts start with a one-hot current job and the fraction of the
/// horizon left. The full-history layout adds tenure (in decades) per catalog
/// occupation and per catalog industry, total tenure and the number of
/// distinct jobs held (divided by ten).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFeatures {
    representation: StateRepresentation,
    n_jobs: usize,
    horizon: u32,
    #[serde(with = "code_pairs")]
    occupations: BTreeMap<u16, usize>,
    #[serde(with = "code_pairs")]
    industries: BTreeMap<u16, usize>,
}

/// Stores code maps as pair lists. JSON object keys are strings, and integer
/// keys do not survive the buffering done by internally tagged enums.
mod code_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<u16, usize>, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(u16, usize)> = map.iter().map(|(&k, &v)| (k, v)).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u16, usize>, D::Error> {
        Ok(Vec::<(u16, usize)>::deserialize(d)?.into_iter().collect())
    }
}

impl StateFeatures {
    pub fn new(representation: StateRepresentation, catalog: &[JobId], horizon: u32) -> Self {
        let mut occupations = BTreeMap::new();
        let mut industries = BTreeMap::new();
        for j in catalog {
            let n = occupations.len();
            occupations.entry(j.occupation).or_insert(n);
            let n = industries.len();
            industries.entry(j.industry).or_insert(n);
        }
        Self {
            representation,
            n_jobs: catalog.len(),
            horizon,
            occupations,
            industries,
        }
    }

    pub fn for_env(env: &Env) -> Self {
        Self::new(env.representation(), env.catalog(), env.horizon())
    }

    pub fn representation(&self) -> StateRepresentation {
        self.representation
    }

    pub fn dim(&self) -> usize {
        match self.representation {
            StateRepresentation::LastJob => self.n_jobs + 1,
            StateRepresentation::FullHistory => self.n_jobs + 1 + self.occupations.len() + self.industries.len() + 2,
        }
    }

    pub fn encode(&self, state: &State) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.encode_into(state, &mut out);
        out
    }

    pub fn encode_into(&self, state: &State, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        out.iter_mut().for_each(|v| *v = 0.0);
        out[state.current] = 1.0;
        let left = self.horizon.saturating_sub(state.t);
        out[self.n_jobs] = f64::from(left) / f64::from(self.horizon.max(1));
        if self.representation == StateRepresentation::FullHistory {
            let occ0 = self.n_jobs + 1;
            let ind0 = occ0 + self.occupations.len();
            let tail = ind0 + self.industries.len();
            let mut distinct: Vec<JobId> = Vec::with_capacity(state.history.len());
            for h in &state.history {
                let decades = f64::from(h.months) / 120.0;
                if let Some(&i) = self.occupations.get(&h.job.occupation) {
                    out[occ0 + i] += decades;
                }
                if let Some(&i) = self.industries.get(&h.job.industry) {
                    out[ind0 + i] += decades;
                }
                out[tail] += decades;
                if !distinct.contains(&h.job) {
                    distinct.push(h.job);
                }
            }
            out[tail + 1] = distinct.len() as f64 / 10.0;
        }
    }
}
