use rand::Rng;

use crate::rng::SimRng;

/// Relative tolerance under which a permuted statistic counts as tying the
/// observed one.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PermutationMode {
    /// Enumerate every relabelling when there are at most `n_permutations`
    /// of them, otherwise sample.
    Auto,
    /// Always sample `n_permutations` random relabellings.
    MonteCarlo,
}

/// Two-sided permutation test on the difference in means.
///
/// When every relabelling can be enumerated within the permutation budget the
/// p-value is exact (the observed labelling is one of them). Otherwise it is
/// `(1 + hits) / (1 + n_permutations)` over random relabellings.
pub fn permutation_test(a: &[f64], b: &[f64], n_permutations: usize, rng: &mut SimRng) -> f64 {
    permutation_test_with(a, b, n_permutations, PermutationMode::Auto, rng)
}

pub fn permutation_test_with(
    a: &[f64],
    b: &[f64],
    n_permutations: usize,
    mode: PermutationMode,
    rng: &mut SimRng,
) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "both samples must be nonempty");
    // Relabel the smaller group; the statistic is symmetric.
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let pooled: Vec<f64> = small.iter().chain(large).copied().collect();
    let (k, n) = (small.len(), pooled.len());
    let total: f64 = pooled.iter().sum();
    let stat = |sum_small: f64| (sum_small / k as f64 - (total - sum_small) / (n - k) as f64).abs();
    let observed = stat(small.iter().sum());
    let threshold = observed - TIE_TOLERANCE * observed.abs();

    if mode == PermutationMode::Auto {
        if let Some(c) = binomial(n, k).filter(|&c| c <= n_permutations as u128) {
            let mut hits = 0u128;
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                let s: f64 = idx.iter().map(|&i| pooled[i]).sum();
                if stat(s) >= threshold {
                    hits += 1;
                }
                if !next_combination(&mut idx, n) {
                    break;
                }
            }
            return hits as f64 / c as f64;
        }
    }

    let mut work = pooled;
    let mut hits = 0usize;
    for _ in 0..n_permutations {
        for i in 0..k {
            let j = rng.random_range(i..n);
            work.swap(i, j);
        }
        let s: f64 = work[..k].iter().sum();
        if stat(s) >= threshold {
            hits += 1;
        }
    }
    (1 + hits) as f64 / (1 + n_permutations) as f64
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

/// Advances a sorted k-subset of 0..n in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 4), Some(70));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(40_000, 20_000), None);
    }

    #[test]
    fn combinations_are_enumerated_once() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
