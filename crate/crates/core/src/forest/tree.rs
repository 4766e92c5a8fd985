//! CART trees stored as flat node arrays.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

pub(crate) const LEAF: u32 = u32::MAX;

/// Impurity criterion used while growing a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Criterion {
    /// Binary targets in {0, 1}; leaves hold the positive fraction.
    Gini,
    /// Real targets; leaves hold the mean.
    Mse,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// A binary decision tree. Node `i` is a leaf when `feature[i] == LEAF`;
/// otherwise rows with `x[feature] <= threshold` go to `left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub feature: Vec<u32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Leaf prediction (positive fraction or mean target); internal nodes
    /// keep the value of their training rows for inspection.
    pub value: Vec<f64>,
    pub n_samples: Vec<u32>,
}

impl DecisionTree {
    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] == LEAF
    }

    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f == LEAF {
                return self.value[node];
            }
            node = if row[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, n: usize) -> usize {
            if t.is_leaf(n) {
                0
            } else {
                1 + go(t, t.left[n] as usize).max(go(t, t.right[n] as usize))
            }
        }
        go(self, 0)
    }

    pub(crate) fn validate_shape(&self) -> bool {
        let n = self.n_nodes();
        n > 0
            && [self.threshold.len(), self.left.len(), self.right.len(), self.value.len(), self.n_samples.len()]
                .iter()
                .all(|&l| l == n)
            && (0..n).all(|i| {
                self.is_leaf(i)
                    || ((self.left[i] as usize) < n
                        && (self.right[i] as usize) < n
                        && self.left[i] as usize > i
                        && self.right[i] as usize > i)
            })
    }

    fn push(&mut self, value: f64, n: usize) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(LEAF);
        self.right.push(LEAF);
        self.value.push(value);
        self.n_samples.push(n as u32);
        self.feature.len() - 1
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    criterion: Criterion,
    params: GrowParams,
    n_features: usize,
    tree: DecisionTree,
    scratch: Vec<(f64, f64)>,
}

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn stats(&self, idx: &[usize]) -> (f64, f64) {
        let n = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let impurity = match self.criterion {
            Criterion::Gini => {
                let p = sum / n;
                n * 2.0 * p * (1.0 - p)
            }
            Criterion::Mse => {
                let mean = sum / n;
                idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum()
            }
        };
        (sum / n, impurity)
    }

    fn best_split_on(&mut self, idx: &[usize], feature: usize) -> Option<Split> {
        let min_leaf = self.params.min_samples_leaf;
        let n = idx.len();
        self.scratch.clear();
        self.scratch
            .extend(idx.iter().map(|&i| (self.x[i][feature], self.y[i])));
        self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if self.scratch[0].0 == self.scratch[n - 1].0 {
            return None;
        }
        let total: f64 = self.scratch.iter().map(|p| p.1).sum();
        let total_sq: f64 = self.scratch.iter().map(|p| p.1 * p.1).sum();
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        let mut best: Option<Split> = None;
        for k in 0..n - 1 {
            let (xv, yv) = self.scratch[k];
            sum_l += yv;
            sq_l += yv * yv;
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf {
                continue;
            }
            if nr < min_leaf {
                break;
            }
            let next = self.scratch[k + 1].0;
            if next == xv {
                continue;
            }
            let (fl, fr) = (nl as f64, nr as f64);
            let sum_r = total - sum_l;
            let score = match self.criterion {
                Criterion::Gini => {
                    let (pl, pr) = (sum_l / fl, sum_r / fr);
                    fl * 2.0 * pl * (1.0 - pl) + fr * 2.0 * pr * (1.0 - pr)
                }
                Criterion::Mse => {
                    (sq_l - sum_l * sum_l / fl) + ((total_sq - sq_l) - sum_r * sum_r / fr)
                }
            };
            if best.is_none_or(|b| score < b.score) {
                let mut threshold = xv + (next - xv) / 2.0;
                if threshold >= next {
                    threshold = xv;
                }
                best = Some(Split {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut SimRng) -> usize {
        let (value, impurity) = self.stats(idx);
        let node = self.tree.push(value, idx.len());
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || idx.len() < 2 * self.params.min_samples_leaf || impurity <= 1e-12 {
            return node;
        }

        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(rng);
        let mut best: Option<Split> = None;
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.params.features_per_split && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(idx, f) {
                if best.is_none_or(|b| s.score < b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return node;
        };
        if split.score >= impurity - 1e-12 * impurity.abs().max(1.0) {
            return node;
        }

        let mut mid = 0;
        for k in 0..idx.len() {
            if self.x[idx[k]][split.feature] <= split.threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        self.tree.feature[node] = split.feature as u32;
        self.tree.threshold[node] = split.threshold;
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.tree.left[node] = left as u32;
        self.tree.right[node] = right as u32;
        node
    }
}

pub(crate) fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    criterion: Criterion,
    params: GrowParams,
    bootstrap: bool,
    rng: &mut SimRng,
) -> DecisionTree {
    let n = x.len();
    let mut idx: Vec<usize> = if bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        x,
        y,
        criterion,
        params,
        n_features: x[0].len(),
        tree: DecisionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            n_samples: Vec::new(),
        },
        scratch: Vec::with_capacity(n),
    };
    b.grow(&mut idx, 0, rng);
    b.tree
}
