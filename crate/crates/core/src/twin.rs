//! The similarity parameter `alpha` and the twin approximation
//! `S_j^T ~ A * B * (S_i^T)^(alpha * sigma_j / sigma_i)`.

use crate::engine::{terminal_pair_unchecked, NoiseDraw, NoiseStream, PathPair, TwinPair};
use crate::error::{ensure, Result, TwinError};

/// Ratio of the coefficients of variation, `sigma_i * mu_j / (sigma_j * mu_i)`.
pub fn alpha(pair: &TwinPair) -> Result<f64> {
    if pair.asset_i.mu == 0.0 {
        return Err(TwinError::UndefinedAlpha);
    }
    ensure(pair.asset_j.sigma > 0.0, || "sigma_j must be positive".to_string())?;
    Ok(pair.asset_i.sigma * pair.asset_j.mu / (pair.asset_j.sigma * pair.asset_i.mu))
}

/// Factors of the twin approximation for one horizon and one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinTerms {
    /// Deterministic factor `A`.
    pub a_term: f64,
    /// Stochastic factor `B`.
    pub b_term: f64,
    /// Power applied to `S_i^T`: `alpha * sigma_j / sigma_i`.
    pub exponent: f64,
}

fn check(pair: &TwinPair, tau: f64) -> Result<f64> {
    pair.validate()?;
    ensure(tau > 0.0 && tau.is_finite(), || {
        format!("horizon must be positive, got {tau}")
    })?;
    alpha(pair)
}

fn exponent(pair: &TwinPair, alpha: f64) -> f64 {
    alpha * pair.asset_j.sigma / pair.asset_i.sigma
}

fn a_term(pair: &TwinPair, alpha: f64, tau: f64) -> f64 {
    let (si, sj) = (pair.asset_i.sigma, pair.asset_j.sigma);
    let power = exponent(pair, alpha);
    pair.asset_j.spot * pair.asset_i.spot.powf(-power) * (0.5 * sj * (alpha * si - sj) * tau).exp()
}

fn b_term(pair: &TwinPair, alpha: f64, tau: f64, z_x: f64, z_y: f64) -> f64 {
    let sj = pair.asset_j.sigma;
    let sqrt_tau = tau.sqrt();
    let x_coef = sj * (1.0 - pair.rho * alpha);
    let y_coef = alpha * sj * pair.rho_complement();
    (x_coef * z_x * sqrt_tau - y_coef * z_y * sqrt_tau).exp()
}

/// `A = S_j (S_i)^(-alpha sigma_j / sigma_i) exp(sigma_j (alpha sigma_i - sigma_j) tau / 2)`.
pub fn deterministic_term(pair: &TwinPair, tau: f64) -> Result<f64> {
    let alpha = check(pair, tau)?;
    Ok(a_term(pair, alpha, tau))
}

/// `B = exp(sigma_j (1 - rho alpha) W_x - alpha sigma_j sqrt(1 - rho^2) W_y)` with
/// `W_x = z_x sqrt(tau)` and `W_y = z_y sqrt(tau)`.
pub fn stochastic_term(pair: &TwinPair, tau: f64, draw: &NoiseDraw) -> Result<f64> {
    let alpha = check(pair, tau)?;
    Ok(b_term(pair, alpha, tau, draw.z_x, draw.z_y))
}

/// `A`, `B` and the exponent for one replication, with `B` taken from the
/// draw's independent `z_x`, `z_y` components.
pub fn twin_terms(pair: &TwinPair, tau: f64, draw: &NoiseDraw) -> Result<TwinTerms> {
    let alpha = check(pair, tau)?;
    Ok(TwinTerms {
        a_term: a_term(pair, alpha, tau),
        b_term: b_term(pair, alpha, tau, draw.z_x, draw.z_y),
        exponent: exponent(pair, alpha),
    })
}

/// Predicted `S_j^T = A * B * (S_i^T)^exponent`.
pub fn predict_twin(s_i_terminal: f64, terms: &TwinTerms) -> Result<f64> {
    ensure(s_i_terminal > 0.0 && s_i_terminal.is_finite(), || {
        format!("terminal price must be positive, got {s_i_terminal}")
    })?;
    ensure(terms.a_term > 0.0 && terms.b_term > 0.0, || {
        format!(
            "twin factors must be positive, got A={} B={}",
            terms.a_term, terms.b_term
        )
    })?;
    Ok(terms.a_term * terms.b_term * s_i_terminal.powf(terms.exponent))
}

/// Relative gap between the simulated `S_j^T` and the twin reconstruction
/// that reuses the pair's own driving noise (`W_x = W_j`, `W_y = W_tilde`).
/// The reconstruction is exact, so this is pure rounding error.
pub fn exact_relation_residual(pair: &TwinPair, tau: f64, draw: &NoiseDraw) -> Result<f64> {
    let alpha = check(pair, tau)?;
    let (s_i, s_j) = terminal_pair_unchecked(pair, tau, draw);
    let a = a_term(pair, alpha, tau);
    let b = b_term(pair, alpha, tau, draw.z_j, draw.z_tilde);
    let rebuilt = a * b * s_i.powf(exponent(pair, alpha));
    Ok(((rebuilt - s_j) / s_j).abs())
}

/// One-step-ahead twin predictions along simulated paths.
///
/// Entry `k > 0` predicts `path_j[k]` from `path_i[k]`, anchoring `A` at the
/// previous prices of both assets. The independent `z_x`, `z_y` come from the
/// same substream that `simulate_paths` used for step `k`, so the output is
/// fixed by `seed`. Entry 0 is the initial price of `j`.
pub fn predict_path(pair: &TwinPair, paths: &PathPair, seed: u64) -> Result<Vec<f64>> {
    ensure(paths.len() >= 2, || "path needs at least one step".to_string())?;
    pair.validate()?;
    let alpha = alpha(pair)?;
    let power = exponent(pair, alpha);

    let mut predicted = Vec::with_capacity(paths.len());
    predicted.push(paths.path_j[0]);
    for (k, draw) in NoiseStream::new(seed, 0).take(paths.len() - 1).enumerate() {
        let dt = paths.times[k + 1] - paths.times[k];
        let mut anchored = *pair;
        anchored.asset_i.spot = paths.path_i[k];
        anchored.asset_j.spot = paths.path_j[k];
        let a = a_term(&anchored, alpha, dt);
        let b = b_term(&anchored, alpha, dt, draw.z_x, draw.z_y);
        predicted.push(a * b * paths.path_i[k + 1].powf(power));
    }
    Ok(predicted)
}
