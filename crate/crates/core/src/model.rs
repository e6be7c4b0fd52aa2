//! Uniform location model: sampling, summary statistics and exact densities.
//!
//! Observations are `X_i ~ unif(theta - K, theta + K)`. The midrange `m` and
//! the range `v` carry all the information any procedure uses; for `n = 2`
//! the range is kept signed (`x_2 - x_1` in observation order) so that
//! `(m, v)` stays a one-to-one transform of the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub theta: f64,
    pub half_length: f64,
    pub n: usize,
}

impl ModelConfig {
    pub fn new(theta: f64, half_length: f64, n: usize) -> Result<Self> {
        let config = Self {
            theta,
            half_length,
            n,
        };
        config.validate()?;
        Ok(config)
    }

    /// `theta = 0`, `K = 1`, `n = 2`.
    pub fn standard() -> Self {
        Self {
            theta: 0.0,
            half_length: 1.0,
            n: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "theta must be finite, got {}",
                self.theta
            )));
        }
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "half_length must be positive, got {}",
                self.half_length
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Observed coordinates, in observation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub coords: Vec<f64>,
}

impl Sample {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.coords.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.coords.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Order statistics `X_(1) <= ... <= X_(n)`.
    pub fn sorted(&self) -> Vec<f64> {
        let mut xs = self.coords.clone();
        xs.sort_by(f64::total_cmp);
        xs
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self::new(self.coords.iter().map(|x| x + c).collect())
    }
}

/// Seeded draw stream. `(seed, stream)` fully determines every draw, so
/// Monte Carlo shards run on distinct streams of one seed and merge
/// deterministically.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: ModelConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(config: ModelConfig, seed: u64, stream: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self { config, rng })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn next_sample(&mut self) -> Sample {
        let mut coords = Vec::with_capacity(self.config.n);
        self.fill(&mut coords);
        Sample::new(coords)
    }

    /// Draws the next sample into `buf`, reusing its allocation.
    pub fn fill(&mut self, buf: &mut Vec<f64>) {
        let ModelConfig {
            theta,
            half_length,
            n,
        } = self.config;
        buf.clear();
        buf.extend((0..n).map(|_| {
            let unit: f64 = self.rng.random();
            (2.0 * unit - 1.0) * half_length + theta
        }));
    }
}

/// First sample of the `(seed, stream)` draw stream.
pub fn sample(config: &ModelConfig, seed: u64, stream: u64) -> Result<Sample> {
    Ok(Sampler::new(*config, seed, stream)?.next_sample())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    /// Midrange `(min + max) / 2`, the equivariant estimate of theta.
    pub m: f64,
    /// Signed `x_2 - x_1` for two observations, `max - min` otherwise.
    pub v: f64,
    pub n: usize,
    pub k_scale: f64,
}

impl SummaryStat {
    /// Standardized ancillary `|v| / K` in `[0, 2]`.
    pub fn u(&self) -> f64 {
        self.v.abs() / self.k_scale
    }
}

pub fn summarize(s: &Sample, config: &ModelConfig) -> Result<SummaryStat> {
    summarize_coords(&s.coords, config.half_length)
}

pub(crate) fn summarize_coords(coords: &[f64], k_scale: f64) -> Result<SummaryStat> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::TooFewObservations(n));
    }
    let (lo, hi) = coords
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let v = if n == 2 { coords[1] - coords[0] } else { hi - lo };
    Ok(SummaryStat {
        m: 0.5 * (lo + hi),
        v,
        n,
        k_scale,
    })
}

/// Rescales a statistic to `K = 1`.
pub fn standardize(stat: &SummaryStat) -> SummaryStat {
    SummaryStat {
        m: stat.m / stat.k_scale,
        v: stat.v / stat.k_scale,
        n: stat.n,
        k_scale: 1.0,
    }
}

/// Inverse of [`standardize`] for a target scale `k_scale`.
pub fn rescale(stat: &SummaryStat, k_scale: f64) -> SummaryStat {
    SummaryStat {
        m: stat.m * k_scale,
        v: stat.v * k_scale,
        n: stat.n,
        k_scale: stat.k_scale * k_scale,
    }
}

/// Marginal density of `V = X_2 - X_1` for `n = 2`, `K = 1`.
pub fn density_v(v: f64) -> f64 {
    if v.abs() < 2.0 {
        (2.0 - v.abs()) / 4.0
    } else {
        0.0
    }
}

/// Density of `M` given `V = v` (`n = 2`, `K = 1`): uniform on
/// `theta +/- (1 - |v|/2)`.
pub fn conditional_density_m(m: f64, v: f64, theta: f64) -> Result<f64> {
    if v.is_nan() || v.abs() >= 2.0 {
        return Err(Error::OutOfSupport {
            value: v,
            lo: -2.0,
            hi: 2.0,
        });
    }
    let half = 1.0 - 0.5 * v.abs();
    if (m - theta).abs() < half {
        Ok(1.0 / (2.0 - v.abs()))
    } else {
        Ok(0.0)
    }
}
