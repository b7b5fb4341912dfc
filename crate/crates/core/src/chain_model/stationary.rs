use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};

use super::{ChainModelError, ChainRates, ForkState, Generator};

/// Stationary probabilities of a truncated fork chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub truncation: u32,
    pub probabilities: BTreeMap<ForkState, f64>,
}

impl StationaryDistribution {
    /// `pi(k, l)`; zero for states outside the truncation.
    pub fn get(&self, k: u32, l: u32) -> f64 {
        self.probabilities
            .get(&ForkState::new(k, l))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }

    /// Max-norm of `pi Q` for the given generator.
    pub fn residual(&self, gen: &Generator) -> f64 {
        let mut flow: HashMap<ForkState, f64> = HashMap::new();
        for s in gen.states() {
            let p = self.get(s.k, s.l);
            *flow.entry(s).or_insert(0.0) += p * gen.diagonal(s);
            for (to, r) in gen.outflow(s) {
                *flow.entry(to).or_insert(0.0) += p * r;
            }
        }
        flow.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mass on states with `k + l > n`.
    pub fn tail_mass(&self, n: u32) -> f64 {
        self.probabilities
            .iter()
            .filter(|(s, _)| s.k + s.l > n)
            .map(|(_, p)| p)
            .sum()
    }
}

fn check_irreducible(gen: &Generator) -> Result<(), ChainModelError> {
    let states = gen.states();
    let mut forward: HashMap<ForkState, Vec<ForkState>> = HashMap::new();
    let mut backward: HashMap<ForkState, Vec<ForkState>> = HashMap::new();
    for ((from, to), _) in gen.entries() {
        forward.entry(from).or_default().push(to);
        backward.entry(to).or_default().push(from);
    }
    for adjacency in [&forward, &backward] {
        let mut seen = vec![ForkState::AGREED];
        let mut queue = VecDeque::from([ForkState::AGREED]);
        while let Some(s) = queue.pop_front() {
            for &next in adjacency.get(&s).into_iter().flatten() {
                if !seen.contains(&next) {
                    seen.push(next);
                    queue.push_back(next);
                }
            }
        }
        if let Some(&lost) = states.iter().find(|s| !seen.contains(s)) {
            return Err(ChainModelError::Reducible(lost));
        }
    }
    Ok(())
}

/// Solves `pi Q = 0`, `sum pi = 1` with states in canonical order.
pub fn solve_stationary(gen: &Generator) -> Result<StationaryDistribution, ChainModelError> {
    solve_stationary_ordered(gen, &gen.states())
}

/// Same as [`solve_stationary`] with an explicit state ordering for the
/// linear system. `order` must be a permutation of `gen.states()`.
pub fn solve_stationary_ordered(
    gen: &Generator,
    order: &[ForkState],
) -> Result<StationaryDistribution, ChainModelError> {
    let n = order.len();
    let index: HashMap<ForkState, usize> = order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    if n != gen.states().len() || index.len() != n || order.iter().any(|s| !gen.contains(*s)) {
        return Err(ChainModelError::InvalidParameter(
            "state order is not a permutation of the generator's states".into(),
        ));
    }
    check_irreducible(gen)?;

    // Rows of Q^T are balance equations; the last one is swapped for the
    // normalisation constraint.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &s in order {
        let col = index[&s];
        a[(col, col)] = gen.diagonal(s);
        for (to, r) in gen.outflow(s) {
            a[(index[&to], col)] += r;
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;

    let x = a.lu().solve(&b).ok_or(ChainModelError::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ChainModelError::Singular);
    }
    let probabilities = order.iter().map(|&s| (s, x[index[&s]].max(0.0))).collect();
    Ok(StationaryDistribution {
        truncation: gen.truncation(),
        probabilities,
    })
}

/// Orphan creation rate `pi(1,1) (lambda1 + lambda2)`, blocks per hour.
pub fn orphan_rate(pi: &StationaryDistribution, rates: &ChainRates) -> f64 {
    pi.get(1, 1) * rates.total_mining()
}
