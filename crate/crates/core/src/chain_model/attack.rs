use super::ChainModelError;

/// Confirmation depth `z` and the per-block probability `p` that the next
/// block belongs to the honest community.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    pub z: u32,
    pub p: f64,
}

impl AttackParams {
    pub fn new(z: u32, p: f64) -> Result<Self, ChainModelError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ChainModelError::InvalidParameter(format!(
                "p must lie in (0,1), got {p}"
            )));
        }
        Ok(Self { z, p })
    }

    /// `p = lambda2 / (lambda1 + lambda2)` for attacker rate `lambda1`.
    pub fn from_rates(z: u32, lambda1: f64, lambda2: f64) -> Result<Self, ChainModelError> {
        if !(lambda1 > 0.0 && lambda2 > 0.0) {
            return Err(ChainModelError::InvalidParameter(format!(
                "rates must be positive, got lambda1={lambda1}, lambda2={lambda2}"
            )));
        }
        Self::new(z, lambda2 / (lambda1 + lambda2))
    }
}

/// Probability that an attacker eventually overtakes a payment buried under
/// `z` confirmations:
///
/// ```text
/// 1 - sum_{k=0}^{z} C(z+k-1, z-1) (p^z (1-p)^k - p^k (1-p)^z)
/// ```
///
/// The number of attacker blocks while the community mines `z` is negative
/// binomial; given `k < z` the attacker catches up with probability
/// `((1-p)/p)^(z-k)`.
pub fn attacker_success_probability(params: &AttackParams) -> f64 {
    let AttackParams { z, p } = *params;
    if z == 0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let zf = f64::from(z);
    // C(z+k-1, z-1) built up incrementally from C(z-1, z-1) = 1.
    let mut coeff = 1.0;
    let mut sum = 0.0;
    for k in 0..=z {
        if k > 0 {
            coeff *= (zf + f64::from(k) - 1.0) / f64::from(k);
        }
        let kf = f64::from(k);
        sum += coeff * (p.powf(zf) * q.powf(kf) - p.powf(kf) * q.powf(zf));
    }
    (1.0 - sum).clamp(0.0, 1.0)
}

/// Smallest pool share for which selfish mining beats honest mining,
/// `(1 - gamma) / (3 - 2 gamma)`.
pub fn selfish_threshold(gamma: f64) -> Result<f64, ChainModelError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ChainModelError::InvalidParameter(format!(
            "gamma must lie in [0,1], got {gamma}"
        )));
    }
    Ok((1.0 - gamma) / (3.0 - 2.0 * gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_cases() {
        for p in [0.55, 0.7, 0.99] {
            let params = AttackParams::new(0, p).unwrap();
            assert_eq!(attacker_success_probability(&params), 1.0);
        }
        for z in 1..10 {
            let params = AttackParams::new(z, 0.5).unwrap();
            assert!((attacker_success_probability(&params) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rates_parameterisation() {
        let a = AttackParams::from_rates(6, 0.6, 5.4).unwrap();
        assert!((a.p - 0.9).abs() < 1e-15);
        assert!(AttackParams::new(3, 1.0).is_err());
        assert!(AttackParams::from_rates(3, 0.0, 1.0).is_err());
    }

    #[test]
    fn one_confirmation_closed_form() {
        // z = 1: P = 1 - [p - (1-p)] - [p(1-p) - p(1-p)] = 2(1-p)
        let params = AttackParams::new(1, 0.8).unwrap();
        assert!((attacker_success_probability(&params) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn threshold_values() {
        assert!((selfish_threshold(0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(selfish_threshold(1.0).unwrap(), 0.0);
        assert!((selfish_threshold(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(selfish_threshold(1.5).is_err());
    }
}
