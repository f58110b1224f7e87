//! Black-Scholes call pricing and the twin-asset call price.
//!
//! The twin price values a call on `j` through a power claim on `i`:
//! `{S_j^T - K_j}^+ ~ A B {(S_i^T)^e - K_i}^+` with `e = alpha sigma_j / sigma_i`
//! and `K_i = K_j / (A B)`. Each replication fixes `B` from its own draw and
//! evaluates the risk-neutral expectation of the power claim in closed form.

pub mod quadrature;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::engine::{NoiseDraw, TwinPair};
use crate::error::{ensure, Result, TwinError};
use crate::twin::{alpha, twin_terms};

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Strike, time to maturity (years) and continuously compounded risk-free rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
}

impl OptionSpec {
    pub fn new(strike: f64, maturity: f64, rate: f64) -> Result<Self> {
        let spec = Self { strike, maturity, rate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.strike > 0.0 && self.strike.is_finite(), || {
            format!("strike must be positive, got {}", self.strike)
        })?;
        ensure(self.maturity > 0.0 && self.maturity.is_finite(), || {
            format!("maturity must be positive, got {}", self.maturity)
        })?;
        ensure(self.rate.is_finite(), || {
            format!("rate must be finite, got {}", self.rate)
        })
    }
}

/// European call under Black-Scholes.
pub fn bs_call(spot: f64, spec: &OptionSpec, sigma: f64) -> Result<f64> {
    spec.validate()?;
    ensure(spot > 0.0 && spot.is_finite(), || {
        format!("spot must be positive, got {spot}")
    })?;
    ensure(sigma > 0.0 && sigma.is_finite(), || {
        format!("volatility must be positive, got {sigma}")
    })?;

    let tau = spec.maturity;
    let vol_sqrt = sigma * tau.sqrt();
    let d1 = ((spot / spec.strike).ln() + (spec.rate + 0.5 * sigma * sigma) * tau) / vol_sqrt;
    let d2 = d1 - vol_sqrt;
    let price = spot * norm_cdf(d1) - spec.strike * (-spec.rate * tau).exp() * norm_cdf(d2);
    Ok(price.max(0.0))
}

/// Twin call price for one replication plus its intermediate quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinPriceResult {
    pub price: f64,
    pub g1: f64,
    pub g2: f64,
    /// Strike of the equivalent power claim on `i`, `K_j / (A B)`.
    pub k_i: f64,
    /// The closed form came out negative through cancellation and was set to 0.
    pub clipped: bool,
}

/// Everything the closed form and the quadrature oracle share.
struct TwinSetup {
    ab: f64,
    exponent: f64,
    k_i: f64,
    g2: f64,
    alpha: f64,
    spot_i: f64,
    sigma_i: f64,
    sigma_j: f64,
    rate: f64,
    tau: f64,
}

fn setup(pair: &TwinPair, spec: &OptionSpec, draw: &NoiseDraw) -> Result<TwinSetup> {
    spec.validate()?;
    pair.validate()?;
    let alpha = alpha(pair)?;
    if alpha <= 0.0 {
        return Err(TwinError::UnsupportedSimilarity(alpha));
    }
    let tau = spec.maturity;
    let terms = twin_terms(pair, tau, draw)?;
    let ab = terms.a_term * terms.b_term;
    let k_i = spec.strike / ab;
    if !(k_i > 0.0 && k_i.is_finite()) {
        return Err(TwinError::Numerical(format!(
            "transformed strike K_i = {k_i} is not positive"
        )));
    }
    let (spot_i, sigma_i) = (pair.asset_i.spot, pair.asset_i.sigma);
    // ln(S_i / K_i^(sigma_i / (alpha sigma_j))), with the power written via the exponent.
    let log_moneyness = spot_i.ln() - k_i.ln() / terms.exponent;
    let g2 = (log_moneyness + (spec.rate - 0.5 * sigma_i * sigma_i) * tau) / (sigma_i * tau.sqrt());
    Ok(TwinSetup {
        ab,
        exponent: terms.exponent,
        k_i,
        g2,
        alpha,
        spot_i,
        sigma_i,
        sigma_j: pair.asset_j.sigma,
        rate: spec.rate,
        tau,
    })
}

/// Closed-form twin price of a call on `j`, conditional on the draw's `B`.
pub fn twin_call(pair: &TwinPair, spec: &OptionSpec, draw: &NoiseDraw) -> Result<TwinPriceResult> {
    let s = setup(pair, spec, draw)?;
    let g1 = s.g2 + s.alpha * s.sigma_j * s.tau.sqrt();
    let growth = ((s.exponent - 1.0) * (s.rate + 0.5 * s.alpha * s.sigma_j * s.sigma_i) * s.tau).exp();
    let asset_leg = s.ab * s.spot_i.powf(s.exponent) * growth * norm_cdf(g1);
    let strike_leg = s.ab * s.k_i * (-s.rate * s.tau).exp() * norm_cdf(s.g2);
    let raw = asset_leg - strike_leg;
    if !raw.is_finite() {
        return Err(TwinError::Numerical(format!("twin price is not finite ({raw})")));
    }
    Ok(TwinPriceResult {
        price: raw.max(0.0),
        g1,
        g2: s.g2,
        k_i: s.k_i,
        clipped: raw < 0.0,
    })
}

const QUAD_ABS_TOL: f64 = 1e-14;
const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_MAX_SEGMENTS: usize = 4000;
const TAIL_WIDTH: f64 = 12.0;

impl TwinSetup {
    /// Upper cutoff: the power claim tilts the Gaussian weight towards
    /// `w = alpha sigma_j sqrt(tau)`, so the tail bound moves with it.
    fn upper(&self) -> f64 {
        TAIL_WIDTH + (self.alpha * self.sigma_j * self.tau.sqrt()).max(0.0)
    }

    /// `(S_i exp((r - sigma_i^2 / 2) tau + w sigma_i sqrt(tau)))^e`.
    fn powered_terminal(&self, w: f64) -> f64 {
        let log_terminal = self.spot_i.ln()
            + (self.rate - 0.5 * self.sigma_i * self.sigma_i) * self.tau
            + w * self.sigma_i * self.tau.sqrt();
        (self.exponent * log_terminal).exp()
    }

    fn prefactor(&self) -> f64 {
        self.ab * (-self.rate * self.tau).exp() / (2.0 * PI).sqrt()
    }
}

/// Twin price from direct numerical integration of the discounted power-claim
/// payoff over `w in [-g2, upper]` against the standard normal density.
pub fn twin_call_quadrature(pair: &TwinPair, spec: &OptionSpec, draw: &NoiseDraw) -> Result<f64> {
    let s = setup(pair, spec, draw)?;
    let integrand = |w: f64| (s.powered_terminal(w) - s.k_i).max(0.0) * (-0.5 * w * w).exp();
    let q = quadrature::integrate(
        integrand,
        -s.g2,
        s.upper(),
        QUAD_ABS_TOL,
        QUAD_REL_TOL,
        QUAD_MAX_SEGMENTS,
    )?;
    Ok(s.prefactor() * q.value)
}

/// The asset leg `I1` and strike leg `I2` of the twin price, each integrated
/// separately; `I1 - I2` is the price.
pub fn twin_call_integrals(pair: &TwinPair, spec: &OptionSpec, draw: &NoiseDraw) -> Result<(f64, f64)> {
    let s = setup(pair, spec, draw)?;
    let (lo, hi) = (-s.g2, s.upper());
    let i1 = quadrature::integrate(
        |w| s.powered_terminal(w) * (-0.5 * w * w).exp(),
        lo,
        hi,
        QUAD_ABS_TOL,
        QUAD_REL_TOL,
        QUAD_MAX_SEGMENTS,
    )?;
    let i2 = quadrature::integrate(
        |w| (-0.5 * w * w).exp(),
        lo,
        hi,
        QUAD_ABS_TOL,
        QUAD_REL_TOL,
        QUAD_MAX_SEGMENTS,
    )?;
    let pre = s.prefactor();
    Ok((pre * i1.value, pre * s.k_i * i2.value))
}
