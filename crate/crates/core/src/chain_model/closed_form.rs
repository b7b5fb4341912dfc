use std::collections::BTreeMap;

use super::paths::binomial;
use super::{ChainRates, ForkState, StationaryDistribution};

/// Unnormalised honest-pool stationary weight of `(k, l)` relative to
/// `pi(0,0) = 1`:
///
/// ```text
/// lambda1^k lambda2^l  sum_{i=0}^{min(k,l)}  n(k,l;i) / ((lambda1+lambda2)^i (lambda1+lambda2+mu)^(k+l-i))
/// ```
///
/// with `n(k,l;i) = (|k-l|+i) 2^i C(k+l-i, max(k,l)) / (k+l-i)`.
pub fn closed_form_pi(rates: &ChainRates, k: u32, l: u32) -> f64 {
    if k == 0 && l == 0 {
        return 1.0;
    }
    let mining = rates.total_mining();
    let busy = mining + rates.mu;
    let high = k.max(l);
    let sum: f64 = (0..=k.min(l))
        .map(|i| {
            let n = k + l - i;
            let paths =
                f64::from(k.abs_diff(l) + i) * 2f64.powi(i as i32) * binomial(n, high) as f64
                    / f64::from(n);
            paths / (mining.powi(i as i32) * busy.powi(n as i32))
        })
        .sum();
    rates.lambda1.powi(k as i32) * rates.lambda2.powi(l as i32) * sum
}

/// [`closed_form_pi`] normalised over the states with `k + l <= truncation`.
pub fn normalized_closed_form(rates: &ChainRates, truncation: u32) -> StationaryDistribution {
    let weights: BTreeMap<ForkState, f64> = (0..=truncation)
        .flat_map(|n| (0..=n).map(move |k| ForkState::new(k, n - k)))
        .map(|s| (s, closed_form_pi(rates, s.k, s.l)))
        .collect();
    let total: f64 = weights.values().sum();
    StationaryDistribution {
        truncation,
        probabilities: weights.into_iter().map(|(s, w)| (s, w / total)).collect(),
    }
}
