//! Small statistics helpers for the empirical side: chi-square goodness of
//! fit and plug-in mutual information from trial counts.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Chi-square goodness-of-fit statistic and p-value.
///
/// Categories with expected probability 0 are excluded from the statistic;
/// any observation there is counted as an automatic rejection (p = 0).
/// Degrees of freedom = (number of positive-probability categories) - 1.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    assert!(n > 0, "no observations");
    let mut stat = 0.0;
    let mut df = 0i64;
    for (&obs, &p) in observed.iter().zip(expected_probs) {
        if p == 0.0 {
            if obs > 0 {
                return (f64::INFINITY, 0.0);
            }
            continue;
        }
        let expect = p * n as f64;
        stat += (obs as f64 - expect).powi(2) / expect;
        df += 1;
    }
    df -= 1;
    assert!(df >= 1, "need at least two positive-probability categories");
    let dist = ChiSquared::new(df as f64).expect("valid dof");
    let p_value = 1.0 - dist.cdf(stat);
    (stat, p_value)
}

/// Plug-in mutual information (bits) between the two components of the key,
/// estimated from counts. Zero-count cells contribute nothing; no smoothing
/// is applied here (the exact assertion lives in the verifier, this is a
/// report-only estimator).
pub fn plug_in_mi<K1, K2>(counts: &HashMap<(K1, K2), u64>) -> f64
where
    K1: Clone + Hash + Eq,
    K2: Clone + Hash + Eq,
{
    let n: u64 = counts.values().sum();
    if n == 0 {
        return 0.0;
    }
    let mut ca: HashMap<K1, u64> = HashMap::new();
    let mut cb: HashMap<K2, u64> = HashMap::new();
    for ((a, b), &c) in counts {
        *ca.entry(a.clone()).or_insert(0) += c;
        *cb.entry(b.clone()).or_insert(0) += c;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for ((a, b), &c) in counts {
        if c == 0 {
            continue;
        }
        let p = c as f64 / nf;
        let pa = ca[a] as f64 / nf;
        let pb = cb[b] as f64 / nf;
        mi += p * (p / (pa * pb)).log2();
    }
    mi.max(0.0)
}

/// Add-one-smoothed variant over an explicit cell universe, for small-sample
/// use when some bin of the product support is empty.
pub fn plug_in_mi_smoothed<K1, K2>(counts: &HashMap<(K1, K2), u64>, cells: &[(K1, K2)]) -> f64
where
    K1: Clone + Hash + Eq,
    K2: Clone + Hash + Eq,
{
    let mut smoothed: HashMap<(K1, K2), u64> = cells.iter().map(|c| (c.clone(), 1)).collect();
    for (k, &c) in counts {
        *smoothed.entry(k.clone()).or_insert(1) += c;
    }
    plug_in_mi(&smoothed)
}
