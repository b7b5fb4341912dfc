//! Race-winning probability of a released pool block in a planar Poisson
//! model.
//!
//! Honest miners `M1` and `M2` sit a distance `d12` apart; pool relays form a
//! Poisson process of intensity `nu`. A transmission over distance `d` takes
//! `N(k d, sigma^2)`. When `M1` publishes a block, each relay re-broadcasts
//! the pool's secret block as soon as it hears about it, and `M2` mines on
//! whichever version reaches it first.
//!
//! * [`gamma_tilde`]: only the relay with the shortest detour `D13 + D32`.
//! * [`gamma_all_relays`]: any relay may win, via the intensity measure
//!   [`lambda_t`] of the relay round-trip times.
//! * [`monte_carlo_gamma`]: sampling oracle for both.

mod monte_carlo;

pub use monte_carlo::{
    default_window_radius, monte_carlo_gamma, monte_carlo_gamma_streams, McEstimate, RelayMode,
};

use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use thiserror::Error;

use crate::quad::{self, QuadError, Tolerance};

/// Delay slope to standard-deviation ratio used for the published grids.
pub const DEFAULT_K_OVER_SIGMA: f64 = 50.0;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("invalid spatial parameters: {0}")]
    InvalidParams(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("monte carlo needs at least 1000 samples, got {0}")]
    TooFewSamples(usize),
}

/// Geometry and delay parameters of the relay model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialParams {
    pub d12: f64,
    pub nu: f64,
    pub k_slope: f64,
    pub sigma: f64,
}

impl SpatialParams {
    pub fn new(d12: f64, nu: f64, k_slope: f64, sigma: f64) -> Result<Self, SpatialError> {
        for (name, v) in [
            ("d12", d12),
            ("nu", nu),
            ("k_slope", k_slope),
            ("sigma", sigma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SpatialError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            d12,
            nu,
            k_slope,
            sigma,
        })
    }

    /// `sigma = 1`, `k = 50`.
    pub fn with_default_ratio(d12: f64, nu: f64) -> Result<Self, SpatialError> {
        Self::new(d12, nu, DEFAULT_K_OVER_SIGMA, 1.0)
    }
}

/// Estimate with its absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    pub abs_error: f64,
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Area of the ellipse with foci `d12` apart and `D13 + D32 = x`.
pub fn ellipse_area(x: f64, d12: f64) -> Result<f64, SpatialError> {
    if x.is_nan() || x < d12 {
        return Err(SpatialError::Domain(format!(
            "ellipse needs x >= d12, got x={x}, d12={d12}"
        )));
    }
    Ok(PI * x / 4.0 * ((x - d12) * (x + d12)).sqrt())
}

/// Inverse of [`ellipse_area`] in `x`.
pub fn ellipse_area_inverse(w: f64, d12: f64) -> Result<f64, SpatialError> {
    if w.is_nan() || w < 0.0 {
        return Err(SpatialError::Domain(format!(
            "area must be nonnegative, got {w}"
        )));
    }
    let scaled = 8.0 * w / PI;
    let d2 = d12 * d12;
    Ok(((scaled.hypot(d2) + d2) / 2.0).sqrt())
}

/// `P(D <= x) = 1 - exp(-nu A(x))` for the shortest relay detour `D`.
pub fn nearest_relay_cdf(x: f64, params: &SpatialParams) -> Result<f64, SpatialError> {
    let area = ellipse_area(x, params.d12)?;
    Ok(-(-params.nu * area).exp_m1())
}

/// Probability that the shortest-detour relay beats direct transmission:
///
/// ```text
/// nu * int_0^inf exp(-nu w) Phi(k (d12 - A^{-1}(w)) / (sqrt(3) sigma)) dw
/// ```
pub fn gamma_tilde(params: &SpatialParams) -> Result<GammaEstimate, SpatialError> {
    let SpatialParams {
        d12,
        nu,
        k_slope,
        sigma,
    } = *params;
    let scale = k_slope / (SQRT_3 * sigma);
    // Beyond this detour the normal factor is below Phi(-9).
    let w_phi = ellipse_area(d12 + 9.0 / scale, d12)?;
    let upper = w_phi.min(40.0 / nu);
    let integrand = |w: f64| {
        let x = ellipse_area_inverse(w, d12).unwrap_or(d12);
        nu * (-nu * w).exp() * std_normal_cdf(scale * (d12 - x))
    };
    let tol = Tolerance {
        abs: 1e-11,
        rel: 1e-11,
        max_intervals: 4000,
    };
    let r = quad::integrate(integrand, 0.0, upper, tol)?;
    Ok(GammaEstimate {
        value: r.value,
        abs_error: r.abs_error,
    })
}

/// Mean measure of the relay round-trip times `T_i = k D_i + N(0, 2 sigma^2)`.
#[derive(Debug, Clone, Copy)]
pub struct IntensityMeasure {
    params: SpatialParams,
}

impl IntensityMeasure {
    pub fn new(params: SpatialParams) -> Self {
        Self { params }
    }

    /// Expected number of relays with detour distance at most `x`.
    pub fn distance_measure(&self, x: f64) -> Result<f64, SpatialError> {
        Ok(self.params.nu * ellipse_area(x, self.params.d12)?)
    }

    /// Expected number of relays whose round trip completes by time `y`.
    pub fn eval(&self, y: f64) -> Result<f64, SpatialError> {
        self.eval_with(y, 1e-12)
    }

    fn eval_with(&self, y: f64, abs_tol: f64) -> Result<f64, SpatialError> {
        let SpatialParams {
            d12,
            nu,
            k_slope,
            sigma,
        } = self.params;
        let spread = SQRT_2 * sigma;
        // Past x_hi the normal factor is below Phi(-7.5) ~ 3e-14.
        let x_hi = (y + 7.5 * spread) / k_slope;
        if x_hi <= d12 {
            return Ok(0.0);
        }
        // Substituting w = A(x) removes the 1/sqrt(x - d12) endpoint
        // singularity of A'(x).
        let w_hi = ellipse_area(x_hi, d12)?;
        let integrand = |w: f64| {
            let x = ellipse_area_inverse(w, d12).unwrap_or(d12);
            std_normal_cdf((y - k_slope * x) / spread)
        };
        let tol = Tolerance {
            abs: abs_tol / nu,
            rel: 1e-12,
            max_intervals: 4000,
        };
        let r = quad::integrate(integrand, 0.0, w_hi, tol)?;
        Ok(nu * r.value)
    }
}

/// `Lambda_T(y)`; see [`IntensityMeasure::eval`].
pub fn lambda_t(y: f64, params: &SpatialParams) -> Result<f64, SpatialError> {
    IntensityMeasure::new(*params).eval(y)
}

/// Probability that some relay's round trip beats the direct transmission
/// `T12 ~ N(k d12, sigma^2)`:
///
/// ```text
/// 1 - int phi_sigma(u - k d12) exp(-Lambda_T(u)) du
/// ```
///
/// with the outer integral over `k d12 +- 8 sigma`.
pub fn gamma_all_relays(params: &SpatialParams) -> Result<GammaEstimate, SpatialError> {
    let measure = IntensityMeasure::new(*params);
    let center = params.k_slope * params.d12;
    let sigma = params.sigma;
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    let inner_error: RefCell<Option<SpatialError>> = RefCell::new(None);
    let integrand = |u: f64| {
        let z = (u - center) / sigma;
        match measure.eval_with(u, 1e-13) {
            Ok(lambda) => norm * (-0.5 * z * z - lambda).exp(),
            Err(e) => {
                inner_error.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let tol = Tolerance {
        abs: 1e-10,
        rel: 1e-10,
        max_intervals: 2000,
    };
    let r = quad::integrate(integrand, center - 8.0 * sigma, center + 8.0 * sigma, tol)
        .map_err(|e| inner_error.take().unwrap_or(SpatialError::Quadrature(e)))?;
    // The truncated normal tails outside +-8 sigma carry 1.2e-15 of mass.
    Ok(GammaEstimate {
        value: 1.0 - r.value,
        abs_error: r.abs_error + 2e-15,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_area_cases() {
        assert_eq!(ellipse_area(3.0, 3.0).unwrap(), 0.0);
        let circle = ellipse_area(2.0, 1e-9).unwrap();
        assert!((circle - PI).abs() < 1e-12);
        // semi-axes a = 1, b = sqrt(3)/2
        let expected = PI * 1.0 * 3f64.sqrt() / 2.0;
        assert!((ellipse_area(2.0, 1.0).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 2.7207).abs() < 1e-4);
        assert!(matches!(
            ellipse_area(0.5, 1.0),
            Err(SpatialError::Domain(_))
        ));
    }

    #[test]
    fn ellipse_inverse_round_trip() {
        for d12 in [0.5, 1.0, 4.0, 12.0] {
            assert!((ellipse_area_inverse(0.0, d12).unwrap() - d12).abs() < 1e-12);
            for x in [d12 + 0.1, 2.0 * d12, 10.0 * d12] {
                let w = ellipse_area(x, d12).unwrap();
                let back = ellipse_area_inverse(w, d12).unwrap();
                assert!((back - x).abs() <= 1e-12 * x, "d12={d12} x={x} back={back}");
            }
        }
        let x = ellipse_area_inverse(2.7207, 1.0).unwrap();
        assert!((x - 2.0).abs() < 1e-4);
        assert!(ellipse_area_inverse(-1.0, 1.0).is_err());
    }

    #[test]
    fn nearest_cdf_limits() {
        let p = SpatialParams::new(4.0, 0.4, 50.0, 1.0).unwrap();
        assert_eq!(nearest_relay_cdf(4.0, &p).unwrap(), 0.0);
        assert!((nearest_relay_cdf(1e4, &p).unwrap() - 1.0).abs() < 1e-15);
        let a8 = 2.0 * PI * 48f64.sqrt();
        let expected = 1.0 - (-0.4 * a8).exp();
        assert!((nearest_relay_cdf(8.0, &p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-12);
        assert!((std_normal_cdf(-8.0) - 6.220_960_574_271_74e-16).abs() < 1e-28);
    }

    #[test]
    fn lambda_t_is_monotone_and_vanishes_on_the_left() {
        let p = SpatialParams::new(4.0, 0.4, 50.0, 1.0).unwrap();
        assert_eq!(lambda_t(-1e3, &p).unwrap(), 0.0);
        assert!(lambda_t(150.0, &p).unwrap() < 1e-12);
        let ys = [195.0, 200.0, 205.0, 210.0, 250.0, 400.0];
        let values: Vec<f64> = ys.iter().map(|&y| lambda_t(y, &p).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    }

    #[test]
    fn distance_measure_matches_cdf() {
        let p = SpatialParams::new(4.0, 0.4, 50.0, 1.0).unwrap();
        let m = IntensityMeasure::new(p);
        let x = 6.5;
        let cdf = nearest_relay_cdf(x, &p).unwrap();
        assert!((1.0 - (-m.distance_measure(x).unwrap()).exp() - cdf).abs() < 1e-15);
    }

    #[test]
    fn gamma_tilde_bounded_by_half() {
        for d12 in [0.5, 4.0, 30.0] {
            for nu in [0.1, 2.0, 10.0] {
                let p = SpatialParams::with_default_ratio(d12, nu).unwrap();
                let g = gamma_tilde(&p).unwrap();
                assert!(g.value <= 0.5 && g.value >= 0.0, "{d12} {nu} {g:?}");
            }
        }
    }

    #[test]
    fn invalid_params() {
        assert!(SpatialParams::new(0.0, 1.0, 50.0, 1.0).is_err());
        assert!(SpatialParams::new(1.0, -1.0, 50.0, 1.0).is_err());
        assert!(SpatialParams::new(1.0, 1.0, 50.0, f64::NAN).is_err());
    }
}
