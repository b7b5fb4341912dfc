use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::{ellipse_area_inverse, SpatialError, SpatialParams, SQRT_3};

const DEFAULT_SUBSTREAMS: u64 = 8;
const MIN_SAMPLES: usize = 1000;

/// Which relays may carry the pool block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayMode {
    /// Only the relay minimising `D13 + D32`.
    Nearest,
    /// Every relay, each with its own delay.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Smallest disc radius (around the segment midpoint) holding every relay
/// that wins with non-negligible probability: half of the larger of the
/// detour `A^{-1}(20 / nu)` and `d12 + 10 sqrt(3) sigma / k`.
pub fn default_window_radius(params: &SpatialParams) -> f64 {
    let by_count = ellipse_area_inverse(20.0 / params.nu, params.d12).unwrap_or(params.d12);
    let by_delay = params.d12 + 10.0 * SQRT_3 * params.sigma / params.k_slope;
    0.5 * by_count.max(by_delay)
}

/// Fraction of sampled relay configurations in which the pool block reaches
/// `M2` first. The disc radius is `max(window_radius, default_window_radius)`.
pub fn monte_carlo_gamma(
    params: &SpatialParams,
    mode: RelayMode,
    n_samples: usize,
    window_radius: Option<f64>,
    seed: u64,
) -> Result<McEstimate, SpatialError> {
    monte_carlo_gamma_streams(
        params,
        mode,
        n_samples,
        window_radius,
        seed,
        DEFAULT_SUBSTREAMS,
    )
}

/// [`monte_carlo_gamma`] with an explicit number of independent substreams.
/// The result depends only on `(seed, n_samples, substreams)`.
pub fn monte_carlo_gamma_streams(
    params: &SpatialParams,
    mode: RelayMode,
    n_samples: usize,
    window_radius: Option<f64>,
    seed: u64,
    substreams: u64,
) -> Result<McEstimate, SpatialError> {
    if n_samples < MIN_SAMPLES {
        return Err(SpatialError::TooFewSamples(n_samples));
    }
    let substreams = substreams.max(1);
    let radius = window_radius
        .unwrap_or(0.0)
        .max(default_window_radius(params));
    let sampler = Sampler::new(*params, radius, mode);
    let n = n_samples as u64;
    let wins: u64 = (0..substreams)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let count = n / substreams + u64::from(s < n % substreams);
            (0..count).filter(|_| sampler.sample(&mut rng)).count() as u64
        })
        .sum();
    let p = wins as f64 / n_samples as f64;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n_samples as f64).sqrt(),
        n_samples,
    })
}

struct Sampler {
    params: SpatialParams,
    radius: f64,
    mode: RelayMode,
    count: Option<Poisson<f64>>,
}

impl Sampler {
    fn new(params: SpatialParams, radius: f64, mode: RelayMode) -> Self {
        let mean = params.nu * PI * radius * radius;
        Self {
            params,
            radius,
            mode,
            count: Poisson::new(mean).ok(),
        }
    }

    /// Detour length `D13 + D32` of a uniform point in the disc; `M1` and
    /// `M2` sit at `(-d12/2, 0)` and `(d12/2, 0)`.
    fn detour<R: Rng>(&self, rng: &mut R) -> f64 {
        let r = self.radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let h = 0.5 * self.params.d12;
        (x + h).hypot(y) + (x - h).hypot(y)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> bool {
        let relays = match &self.count {
            Some(dist) => dist.sample(rng) as u64,
            None => 0,
        };
        let SpatialParams {
            d12,
            k_slope,
            sigma,
            ..
        } = self.params;
        match self.mode {
            RelayMode::Nearest => {
                if relays == 0 {
                    return false;
                }
                let mut best = f64::INFINITY;
                for _ in 0..relays {
                    best = best.min(self.detour(rng));
                }
                let t13 = k_slope * best + sigma * rng.sample::<f64, _>(StandardNormal);
                let t32 = sigma * rng.sample::<f64, _>(StandardNormal);
                let t12 = k_slope * d12 + sigma * rng.sample::<f64, _>(StandardNormal);
                t13 + t32 - t12 < 0.0
            }
            RelayMode::All => {
                let t12 = k_slope * d12 + sigma * rng.sample::<f64, _>(StandardNormal);
                let spread = SQRT_2 * sigma;
                for _ in 0..relays {
                    let d = self.detour(rng);
                    let t = k_slope * d + spread * rng.sample::<f64, _>(StandardNormal);
                    if t <= t12 {
                        return true;
                    }
                }
                false
            }
        }
    }
}
