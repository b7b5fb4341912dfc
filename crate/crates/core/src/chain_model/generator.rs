use std::collections::BTreeMap;
use std::fmt;

use super::ChainModelError;

/// Mining and communication rates, all per hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRates {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
}

impl ChainRates {
    /// Validated rates: all positive and the pool slower than the community.
    pub fn new(lambda1: f64, lambda2: f64, mu: f64) -> Result<Self, ChainModelError> {
        let rates = Self::unchecked(lambda1, lambda2, mu)?;
        if lambda1 >= lambda2 {
            return Err(ChainModelError::InvalidRates(format!(
                "pool rate lambda1={lambda1} must be below community rate lambda2={lambda2}"
            )));
        }
        Ok(rates)
    }

    /// Positivity is still enforced; the `lambda1 < lambda2` ordering is not.
    pub fn unchecked(lambda1: f64, lambda2: f64, mu: f64) -> Result<Self, ChainModelError> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("mu", mu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ChainModelError::InvalidRates(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            lambda1,
            lambda2,
            mu,
        })
    }

    pub fn total_mining(&self) -> f64 {
        self.lambda1 + self.lambda2
    }
}

/// Pool and community branch lengths past the last agreed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForkState {
    pub k: u32,
    pub l: u32,
}

impl ForkState {
    pub const AGREED: ForkState = ForkState { k: 0, l: 0 };

    pub const fn new(k: u32, l: u32) -> Self {
        Self { k, l }
    }
}

impl fmt::Display for ForkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Honest,
    Selfish,
}

impl Variant {
    /// Whether a completed communication returns `state` to `(0,0)`.
    fn resets(self, s: ForkState) -> bool {
        match self {
            Variant::Honest => s.k != s.l,
            // The pool reveals only when behind, or when cashing in a lead
            // that just dropped to one.
            Variant::Selfish => s.k < s.l || (s.k >= 2 && s.l == s.k - 1),
        }
    }
}

/// Sparse generator of the truncated chain over states with `k + l <= N`.
///
/// Only off-diagonal rates are stored; the diagonal is minus the row sum.
#[derive(Debug, Clone)]
pub struct Generator {
    truncation: u32,
    variant: Variant,
    rates: ChainRates,
    entries: BTreeMap<(ForkState, ForkState), f64>,
}

impl Generator {
    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn rates(&self) -> ChainRates {
        self.rates
    }

    /// States in canonical order: by `k + l`, then by `k`.
    pub fn states(&self) -> Vec<ForkState> {
        (0..=self.truncation)
            .flat_map(|n| (0..=n).map(move |k| ForkState::new(k, n - k)))
            .collect()
    }

    pub fn contains(&self, s: ForkState) -> bool {
        s.k + s.l <= self.truncation
    }

    /// Off-diagonal rate from `from` to `to` (zero when absent).
    pub fn rate(&self, from: ForkState, to: ForkState) -> f64 {
        if from == to {
            return self.diagonal(from);
        }
        self.entries.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// Total outflow of `s`, negated.
    pub fn diagonal(&self, s: ForkState) -> f64 {
        -self.outflow(s).map(|(_, r)| r).sum::<f64>()
    }

    /// Off-diagonal transitions leaving `s`.
    pub fn outflow(&self, s: ForkState) -> impl Iterator<Item = (ForkState, f64)> + '_ {
        let lo = (s, ForkState::new(0, 0));
        let hi = (s, ForkState::new(u32::MAX, u32::MAX));
        self.entries.range(lo..=hi).map(|(&(_, to), &r)| (to, r))
    }

    /// All off-diagonal entries `((from, to), rate)` in deterministic order.
    pub fn entries(&self) -> impl Iterator<Item = ((ForkState, ForkState), f64)> + '_ {
        self.entries.iter().map(|(&key, &r)| (key, r))
    }

    /// Copy with the `from -> to` transition removed. Only useful for
    /// exercising the solver's reducibility check.
    #[doc(hidden)]
    pub fn without_transition(&self, from: ForkState, to: ForkState) -> Self {
        let mut g = self.clone();
        g.entries.remove(&(from, to));
        g
    }

    fn add(&mut self, from: ForkState, to: ForkState, rate: f64) {
        if from != to && rate > 0.0 {
            *self.entries.entry((from, to)).or_insert(0.0) += rate;
        }
    }
}

/// Builds the truncated generator.
///
/// Mining moves `(k,l)` to `(k+1,l)` at `lambda1` and to `(k,l+1)` at
/// `lambda2`. On the boundary `k + l = N` both mining moves are redirected to
/// `(0,0)` so the truncated chain stays irreducible and conservative.
pub fn build_generator(
    rates: ChainRates,
    variant: Variant,
    truncation: u32,
) -> Result<Generator, ChainModelError> {
    if truncation < 2 {
        return Err(ChainModelError::Truncation(truncation));
    }
    let mut gen = Generator {
        truncation,
        variant,
        rates,
        entries: BTreeMap::new(),
    };
    for s in gen.states() {
        let pool = ForkState::new(s.k + 1, s.l);
        let community = ForkState::new(s.k, s.l + 1);
        for (target, rate) in [(pool, rates.lambda1), (community, rates.lambda2)] {
            let target = if gen.contains(target) {
                target
            } else {
                ForkState::AGREED
            };
            gen.add(s, target, rate);
        }
        if s != ForkState::AGREED && variant.resets(s) {
            gen.add(s, ForkState::AGREED, rates.mu);
        }
    }
    Ok(gen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_rates() -> ChainRates {
        ChainRates::new(0.6, 5.4, 285.0).unwrap()
    }

    fn outflow(gen: &Generator, k: u32, l: u32) -> Vec<(ForkState, f64)> {
        gen.outflow(ForkState::new(k, l)).collect()
    }

    #[test]
    fn honest_off_diagonal_state() {
        let gen = build_generator(table_rates(), Variant::Honest, 6).unwrap();
        let out = outflow(&gen, 1, 2);
        assert_eq!(
            out,
            vec![
                (ForkState::new(0, 0), 285.0),
                (ForkState::new(1, 3), 5.4),
                (ForkState::new(2, 2), 0.6),
            ]
        );
        // (1,1) keeps racing until the next block
        assert!(outflow(&gen, 1, 1)
            .iter()
            .all(|(to, _)| *to != ForkState::AGREED));
    }

    #[test]
    fn selfish_reset_rules() {
        let gen = build_generator(table_rates(), Variant::Selfish, 6).unwrap();
        let reset = |k, l| gen.rate(ForkState::new(k, l), ForkState::AGREED);
        assert_eq!(reset(2, 1), 285.0);
        assert_eq!(reset(3, 2), 285.0);
        assert_eq!(reset(0, 1), 285.0);
        assert_eq!(reset(3, 1), 0.0);
        assert_eq!(reset(1, 0), 0.0);
        assert_eq!(reset(2, 0), 0.0);
        assert_eq!(reset(2, 2), 0.0);
    }

    #[test]
    fn boundary_mining_is_redirected() {
        let gen = build_generator(table_rates(), Variant::Honest, 6).unwrap();
        // (3,3) on the boundary: both mining moves go to (0,0), no reset.
        assert!((gen.rate(ForkState::new(3, 3), ForkState::AGREED) - 6.0).abs() < 1e-12);
        // (2,4): reset plus redirected mining.
        assert!((gen.rate(ForkState::new(2, 4), ForkState::AGREED) - 291.0).abs() < 1e-12);
    }

    #[test]
    fn rows_are_conservative() {
        for variant in [Variant::Honest, Variant::Selfish] {
            let gen = build_generator(table_rates(), variant, 8).unwrap();
            for s in gen.states() {
                let off: f64 = gen.outflow(s).map(|(_, r)| r).sum();
                assert!((gen.diagonal(s) + off).abs() < 1e-12);
                assert!(gen.outflow(s).all(|(to, r)| r >= 0.0 && gen.contains(to)));
            }
        }
    }

    #[test]
    fn rate_validation() {
        assert!(ChainRates::new(5.4, 0.6, 285.0).is_err());
        assert!(ChainRates::new(3.0, 3.0, 285.0).is_err());
        assert!(ChainRates::new(0.0, 5.4, 285.0).is_err());
        assert!(ChainRates::new(0.6, 5.4, -1.0).is_err());
        assert!(ChainRates::unchecked(3.0, 3.0, 285.0).is_ok());
        assert_eq!(
            build_generator(table_rates(), Variant::Honest, 1).unwrap_err(),
            ChainModelError::Truncation(1)
        );
    }
}
