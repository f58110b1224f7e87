//! Correlated geometric Brownian motion sampled from its exact lognormal
//! solution.
//!
//! Asset `j` is driven by `z_j`; asset `i` by `rho * z_j + sqrt(1 - rho^2) * z_tilde`,
//! so the two Wiener increments have correlation `rho` and `z_j` is shared.
//! All randomness comes from ChaCha8 streams keyed by `(master seed, index)`,
//! which makes every replication reproducible in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{ensure, Result, TwinError};

/// Drift, volatility and reference-time price of one lognormal asset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetParams {
    pub mu: f64,
    pub sigma: f64,
    pub spot: f64,
}

impl AssetParams {
    pub fn new(mu: f64, sigma: f64, spot: f64) -> Result<Self> {
        let asset = Self { mu, sigma, spot };
        asset.validate()?;
        Ok(asset)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.mu.is_finite(), || format!("drift must be finite, got {}", self.mu))?;
        ensure(self.sigma > 0.0 && self.sigma.is_finite(), || {
            format!("volatility must be positive, got {}", self.sigma)
        })?;
        ensure(self.spot > 0.0 && self.spot.is_finite(), || {
            format!("spot must be positive, got {}", self.spot)
        })
    }

    /// Terminal price after `tau` years given the standardised driving shock.
    fn terminal(&self, tau: f64, shock: f64) -> f64 {
        self.spot * ((self.mu - 0.5 * self.sigma * self.sigma) * tau + self.sigma * shock * tau.sqrt()).exp()
    }
}

/// The traded twin `asset_i`, the target `asset_j`, and their return correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinPair {
    pub asset_i: AssetParams,
    pub asset_j: AssetParams,
    pub rho: f64,
}

impl TwinPair {
    pub fn new(asset_i: AssetParams, asset_j: AssetParams, rho: f64) -> Result<Self> {
        let pair = Self { asset_i, asset_j, rho };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.asset_i.validate()?;
        self.asset_j.validate()?;
        ensure((-1.0..=1.0).contains(&self.rho), || {
            format!("correlation must lie in [-1, 1], got {}", self.rho)
        })?;
        if self.asset_i.mu == 0.0 {
            return Err(TwinError::UndefinedAlpha);
        }
        Ok(())
    }

    /// The same pair with the roles of the two assets exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            asset_i: self.asset_j,
            asset_j: self.asset_i,
            rho: self.rho,
        }
    }

    /// `sqrt(1 - rho^2)`, clamped so that `|rho| = 1` gives exactly zero.
    pub fn rho_complement(&self) -> f64 {
        (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }
}

/// Four independent standard normal samples for one replication.
///
/// `z_j` and `z_tilde` drive the pair itself; `z_x` and `z_y` feed the
/// stochastic factor of the twin approximation. Wiener increments over a
/// horizon `tau` are `z * sqrt(tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseDraw {
    pub z_j: f64,
    pub z_tilde: f64,
    pub z_x: f64,
    pub z_y: f64,
}

impl NoiseDraw {
    pub fn new(z_j: f64, z_tilde: f64, z_x: f64, z_y: f64) -> Self {
        Self { z_j, z_tilde, z_x, z_y }
    }

    pub fn sample<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            z_j: StandardNormal.sample(rng),
            z_tilde: StandardNormal.sample(rng),
            z_x: StandardNormal.sample(rng),
            z_y: StandardNormal.sample(rng),
        }
    }

    /// Shock driving asset `i`: `rho * z_j + sqrt(1 - rho^2) * z_tilde`.
    pub fn shock_i(&self, rho: f64) -> f64 {
        rho * self.z_j + (1.0 - rho * rho).max(0.0).sqrt() * self.z_tilde
    }
}

/// Independent substream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Endless sequence of draws from one substream.
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            rng: substream(seed, stream),
        }
    }
}

impl Iterator for NoiseStream {
    type Item = NoiseDraw;

    fn next(&mut self) -> Option<NoiseDraw> {
        Some(NoiseDraw::sample(&mut self.rng))
    }
}

/// The draw used by replication `index` under `seed`.
pub fn replication_draw(seed: u64, index: u64) -> NoiseDraw {
    NoiseDraw::sample(&mut substream(seed, index))
}

/// Draws for replications `0..n`, generated in parallel. Element `k` is
/// always `replication_draw(seed, k)`, whatever the thread count.
pub fn draw_bank(seed: u64, n: usize) -> Vec<NoiseDraw> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = base.clone();
            rng.set_stream(k);
            NoiseDraw::sample(&mut rng)
        })
        .collect()
}

fn check_tau(tau: f64) -> Result<()> {
    ensure(tau > 0.0 && tau.is_finite(), || {
        format!("horizon must be positive, got {tau}")
    })
}

/// Exact terminal prices `(S_i^T, S_j^T)` after `tau` years.
pub fn terminal_pair(pair: &TwinPair, tau: f64, draw: &NoiseDraw) -> Result<(f64, f64)> {
    check_tau(tau)?;
    pair.validate()?;
    Ok(terminal_pair_unchecked(pair, tau, draw))
}

pub(crate) fn terminal_pair_unchecked(pair: &TwinPair, tau: f64, draw: &NoiseDraw) -> (f64, f64) {
    let s_i = pair.asset_i.terminal(tau, draw.shock_i(pair.rho));
    let s_j = pair.asset_j.terminal(tau, draw.z_j);
    (s_i, s_j)
}

/// Sampled trajectories of both assets on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub times: Vec<f64>,
    pub path_i: Vec<f64>,
    pub path_j: Vec<f64>,
}

impl PathPair {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Simulates `n_steps` exact lognormal steps of size `dt` starting from the
/// spots. Step `k` consumes the `k`-th draw of substream 0 of `seed`.
pub fn simulate_paths(pair: &TwinPair, n_steps: usize, dt: f64, seed: u64) -> Result<PathPair> {
    ensure(n_steps >= 1, || "at least one step is required".to_string())?;
    check_tau(dt)?;
    pair.validate()?;

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut path_i = Vec::with_capacity(n_steps + 1);
    let mut path_j = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    path_i.push(pair.asset_i.spot);
    path_j.push(pair.asset_j.spot);

    let mut step_pair = *pair;
    for (k, draw) in NoiseStream::new(seed, 0).take(n_steps).enumerate() {
        let (s_i, s_j) = terminal_pair_unchecked(&step_pair, dt, &draw);
        times.push((k + 1) as f64 * dt);
        path_i.push(s_i);
        path_j.push(s_j);
        step_pair.asset_i.spot = s_i;
        step_pair.asset_j.spot = s_j;
    }
    Ok(PathPair { times, path_i, path_j })
}

/// Continuously compounded return `ln(s_end / s_start)`.
pub fn log_return(s_end: f64, s_start: f64) -> Result<f64> {
    ensure(s_end > 0.0 && s_start > 0.0, || {
        format!("prices must be positive, got {s_end} and {s_start}")
    })?;
    Ok((s_end / s_start).ln())
}
