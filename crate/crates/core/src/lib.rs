//! Twin-asset Monte Carlo toolkit.
//!
//! Two correlated lognormal assets are simulated exactly; one of them (the
//! traded "twin" `i`) is used to approximate the other (`j`) through the
//! similarity pair `(rho, alpha)`, where `alpha` is the ratio of the two
//! coefficients of variation. The same approximation yields a closed-form
//! price for a call on `j` written in terms of `i`.
//!
//! Modules:
//! - [`engine`]: correlated GBM sampling and deterministic noise streams.
//! - [`twin`]: `alpha`, the `A`/`B` factors and the twin prediction.
//! - [`pricing`]: Black-Scholes, the twin call price and its quadrature check.
//! - [`harness`]: MAPE grids over `(rho, alpha)`, sigma sweeps and horizons.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod engine;
pub mod error;
pub mod harness;
pub mod pricing;
pub mod twin;

pub use engine::{AssetParams, NoiseDraw, PathPair, TwinPair};
pub use error::{Result, TwinError};
pub use harness::{GridSpec, MapeGrid};
pub use pricing::{OptionSpec, TwinPriceResult};
pub use twin::TwinTerms;

/// Trading days per year used for all horizon conventions.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
/// One trading day in years.
pub const ONE_DAY: f64 = 1.0 / TRADING_DAYS_PER_YEAR;
/// One trading month (21 days) in years.
pub const ONE_MONTH: f64 = 21.0 / TRADING_DAYS_PER_YEAR;
