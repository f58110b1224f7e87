//! Monte Carlo MAPE experiments over `(rho, alpha)` grids.
//!
//! Every cell reuses the same bank of replication draws (common random
//! numbers), and each cell accumulates its replications sequentially. Cells
//! run in parallel, so the output does not depend on the thread count.

use rayon::prelude::*;

use crate::engine::{draw_bank, terminal_pair_unchecked, AssetParams, NoiseDraw, TwinPair};
use crate::error::{ensure, Result, TwinError};
use crate::pricing::{bs_call, twin_call, OptionSpec};
use crate::twin::{alpha, deterministic_term, stochastic_term};
use crate::ONE_DAY;

/// Drift of `j` that gives the pair the requested `alpha`.
pub fn alpha_to_mu_j(alpha_target: f64, mu_i: f64, sigma_i: f64, sigma_j: f64) -> Result<f64> {
    ensure(sigma_i > 0.0 && sigma_j > 0.0, || {
        format!("volatilities must be positive, got sigma_i={sigma_i} sigma_j={sigma_j}")
    })?;
    ensure(mu_i != 0.0 && mu_i.is_finite(), || {
        format!("mu_i must be nonzero, got {mu_i}")
    })?;
    ensure(alpha_target > 0.0 && alpha_target.is_finite(), || {
        format!("alpha must be positive, got {alpha_target}")
    })?;
    Ok(alpha_target * sigma_j * mu_i / sigma_i)
}

/// Evenly spaced values from `start` to `stop` inclusive, snapped to 12
/// decimals so that grid points such as 1.0 are hit exactly.
pub fn stepped_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    ensure(step > 0.0 && step.is_finite(), || {
        format!("grid step must be positive, got {step}")
    })?;
    ensure(stop >= start, || format!("grid stop {stop} is below start {start}"))?;
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rho_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub n_replications: usize,
    /// Prediction horizon in years (asset experiments only).
    pub horizon: f64,
    pub master_seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_140_117;
pub const ASSET_REPLICATIONS: usize = 40_000;
pub const OPTION_REPLICATIONS: usize = 10_000;

impl GridSpec {
    pub fn default_rho_values() -> Vec<f64> {
        stepped_range(-1.0, 1.0, 0.1).expect("static grid")
    }

    pub fn default_alpha_values() -> Vec<f64> {
        stepped_range(0.5, 1.5, 0.05).expect("static grid")
    }

    /// 21 x 21 grid, one-day horizon, 40,000 replications.
    pub fn asset_default() -> Self {
        Self {
            rho_values: Self::default_rho_values(),
            alpha_values: Self::default_alpha_values(),
            n_replications: ASSET_REPLICATIONS,
            horizon: ONE_DAY,
            master_seed: DEFAULT_SEED,
        }
    }

    /// Same grid with 10,000 replications.
    pub fn option_default() -> Self {
        Self {
            n_replications: OPTION_REPLICATIONS,
            ..Self::asset_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.rho_values.is_empty() && !self.alpha_values.is_empty(), || {
            "grid needs at least one rho and one alpha".to_string()
        })?;
        for &rho in &self.rho_values {
            ensure((-1.0..=1.0).contains(&rho), || format!("rho {rho} outside [-1, 1]"))?;
        }
        for &a in &self.alpha_values {
            if !(a > 0.0 && a.is_finite()) {
                return Err(TwinError::UnsupportedSimilarity(a));
            }
        }
        ensure(self.n_replications >= 1, || "need at least one replication".to_string())?;
        ensure(self.horizon > 0.0 && self.horizon.is_finite(), || {
            format!("horizon must be positive, got {}", self.horizon)
        })
    }
}

/// MAPE (percent) and its Monte Carlo standard error per `(rho, alpha)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MapeGrid {
    /// `grid[rho_index][alpha_index]`.
    pub grid: Vec<Vec<f64>>,
    pub standard_errors: Vec<Vec<f64>>,
    pub spec: GridSpec,
    /// Replications whose closed-form option price was clipped at zero.
    pub clipped: usize,
}

impl MapeGrid {
    pub fn mape(&self, rho_index: usize, alpha_index: usize) -> f64 {
        self.grid[rho_index][alpha_index]
    }

    pub fn se(&self, rho_index: usize, alpha_index: usize) -> f64 {
        self.standard_errors[rho_index][alpha_index]
    }

    /// Cells in row-major order as `(rho, alpha, mape, se)`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.spec.rho_values.iter().enumerate().flat_map(move |(r, &rho)| {
            self.spec
                .alpha_values
                .iter()
                .enumerate()
                .map(move |(a, &alpha)| (rho, alpha, self.grid[r][a], self.standard_errors[r][a]))
        })
    }

    pub fn rho_index(&self, rho: f64) -> Option<usize> {
        self.spec.rho_values.iter().position(|&v| (v - rho).abs() < 1e-9)
    }

    pub fn alpha_index(&self, alpha: f64) -> Option<usize> {
        self.spec.alpha_values.iter().position(|&v| (v - alpha).abs() < 1e-9)
    }
}

/// Welford accumulator for the mean and its standard error.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct RunningStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn mean_and_se(&self) -> (f64, f64) {
        if self.n < 2 {
            return (self.mean, 0.0);
        }
        let n = self.n as f64;
        (self.mean, (self.m2.max(0.0) / (n - 1.0) / n).sqrt())
    }
}

/// Absolute percentage errors of estimates against a truth.
#[derive(Default)]
struct ErrorTally(RunningStats);

impl ErrorTally {
    fn push(&mut self, estimate: f64, truth: f64) {
        self.0.push(100.0 * ((estimate - truth) / truth).abs());
    }

    fn mean_and_se(&self) -> (f64, f64) {
        self.0.mean_and_se()
    }
}

/// Base pair with `rho` and `mu_j` set for one grid cell.
fn cell_pair(base: &TwinPair, rho: f64, alpha_target: f64) -> Result<TwinPair> {
    let mu_j = alpha_to_mu_j(alpha_target, base.asset_i.mu, base.asset_i.sigma, base.asset_j.sigma)?;
    TwinPair::new(
        base.asset_i,
        AssetParams {
            mu: mu_j,
            ..base.asset_j
        },
        rho,
    )
}

struct CellOutcome {
    mape: f64,
    se: f64,
    clipped: usize,
}

fn run_grid<F>(base: &TwinPair, grid: &GridSpec, cell: F) -> Result<MapeGrid>
where
    F: Fn(&TwinPair, &[NoiseDraw]) -> Result<CellOutcome> + Sync,
{
    grid.validate()?;
    base.validate()?;
    let bank = draw_bank(grid.master_seed, grid.n_replications);
    let n_alpha = grid.alpha_values.len();
    let coords: Vec<(f64, f64)> = grid
        .rho_values
        .iter()
        .flat_map(|&rho| grid.alpha_values.iter().map(move |&a| (rho, a)))
        .collect();

    let outcomes: Vec<CellOutcome> = coords
        .par_iter()
        .map(|&(rho, a)| cell(&cell_pair(base, rho, a)?, &bank))
        .collect::<Result<_>>()?;

    let mut out = MapeGrid {
        grid: Vec::with_capacity(grid.rho_values.len()),
        standard_errors: Vec::with_capacity(grid.rho_values.len()),
        spec: grid.clone(),
        clipped: 0,
    };
    for row in outcomes.chunks(n_alpha) {
        out.grid.push(row.iter().map(|c| c.mape).collect());
        out.standard_errors.push(row.iter().map(|c| c.se).collect());
        out.clipped += row.iter().map(|c| c.clipped).sum::<usize>();
    }
    Ok(out)
}

/// MAPE of predicting `S_j` at `grid.horizon` from its twin `i`.
///
/// Each replication simulates the pair from its `z_j`, `z_tilde` and builds
/// the twin prediction with the independent `z_x`, `z_y`.
pub fn mape_asset(base: &TwinPair, grid: &GridSpec) -> Result<MapeGrid> {
    let tau = grid.horizon;
    run_grid(base, grid, |pair, bank| {
        let a = deterministic_term(pair, tau)?;
        let power = alpha(pair)? * pair.asset_j.sigma / pair.asset_i.sigma;
        let mut tally = ErrorTally::default();
        for draw in bank {
            let (s_i, s_j) = terminal_pair_unchecked(pair, tau, draw);
            let b = stochastic_term(pair, tau, draw)?;
            tally.push(a * b * s_i.powf(power), s_j);
        }
        let (mape, se) = tally.mean_and_se();
        Ok(CellOutcome { mape, se, clipped: 0 })
    })
}

/// MAPE of the twin call price against the Black-Scholes price of the call on `j`.
///
/// The benchmark depends on `sigma_j` and the spot of `j` only, so it is
/// computed once. `grid.horizon` is not used; the option maturity applies.
pub fn mape_option(base: &TwinPair, spec: &OptionSpec, grid: &GridSpec) -> Result<MapeGrid> {
    let benchmark = bs_call(base.asset_j.spot, spec, base.asset_j.sigma)?;
    if benchmark <= 0.0 {
        return Err(TwinError::Numerical(format!(
            "Black-Scholes benchmark {benchmark} is not positive; MAPE is undefined"
        )));
    }
    run_grid(base, grid, |pair, bank| {
        let mut tally = ErrorTally::default();
        let mut clipped = 0;
        for draw in bank {
            let result = twin_call(pair, spec, draw)?;
            clipped += usize::from(result.clipped);
            tally.push(result.price, benchmark);
        }
        let (mape, se) = tally.mean_and_se();
        Ok(CellOutcome { mape, se, clipped })
    })
}

/// One asset-prediction grid per value of `sigma_j`, all on the same draws.
pub fn sigma_sweep(base: &TwinPair, sigmas_j: &[f64], grid: &GridSpec) -> Result<Vec<MapeGrid>> {
    ensure(!sigmas_j.is_empty(), || {
        "sigma sweep needs at least one value".to_string()
    })?;
    sigmas_j
        .iter()
        .map(|&sigma_j| {
            ensure(sigma_j > 0.0 && sigma_j.is_finite(), || {
                format!("sigma_j must be positive, got {sigma_j}")
            })?;
            let mut pair = *base;
            pair.asset_j.sigma = sigma_j;
            mape_asset(&pair, grid)
        })
        .collect()
}

/// One asset-prediction grid per horizon, all on the same draws.
pub fn horizon_compare(base: &TwinPair, horizons: &[f64], grid: &GridSpec) -> Result<Vec<MapeGrid>> {
    ensure(!horizons.is_empty(), || "need at least one horizon".to_string())?;
    horizons
        .iter()
        .map(|&horizon| {
            mape_asset(
                base,
                &GridSpec {
                    horizon,
                    ..grid.clone()
                },
            )
        })
        .collect()
}

/// Twin call price averaged over replications `0..n` of `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceStats {
    pub mean: f64,
    pub se: f64,
    pub clipped: usize,
}

pub fn twin_price_stats(pair: &TwinPair, spec: &OptionSpec, n: usize, seed: u64) -> Result<PriceStats> {
    ensure(n >= 1, || "need at least one replication".to_string())?;
    let bank = draw_bank(seed, n);
    let mut stats = RunningStats::default();
    let mut clipped = 0;
    for draw in &bank {
        let result = twin_call(pair, spec, draw)?;
        clipped += usize::from(result.clipped);
        stats.push(result.price);
    }
    let (mean, se) = stats.mean_and_se();
    Ok(PriceStats { mean, se, clipped })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`. Results do not depend on the choice.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(n) => {
            ensure(n >= 1, || "thread count must be at least 1".to_string())?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| TwinError::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> TwinPair {
        TwinPair::new(
            AssetParams::new(0.4, 0.2, 80.0).unwrap(),
            AssetParams::new(0.8, 0.4, 90.0).unwrap(),
            0.0,
        )
        .unwrap()
    }

    fn small_grid(rhos: Vec<f64>, alphas: Vec<f64>, n: usize) -> GridSpec {
        GridSpec {
            rho_values: rhos,
            alpha_values: alphas,
            n_replications: n,
            horizon: ONE_DAY,
            master_seed: 7,
        }
    }

    #[test]
    fn alpha_to_mu_j_reference_values() {
        assert!((alpha_to_mu_j(1.0, 0.4, 0.2, 0.4).unwrap() - 0.8).abs() < 1e-15);
        assert!((alpha_to_mu_j(2.0, 0.4, 0.2, 0.4).unwrap() - 1.6).abs() < 1e-15);
        assert!(alpha_to_mu_j(0.0, 0.4, 0.2, 0.4).is_err());
        assert!(alpha_to_mu_j(1.0, 0.0, 0.2, 0.4).is_err());
        assert!(alpha_to_mu_j(1.0, 0.4, -0.2, 0.4).is_err());
    }

    #[test]
    fn default_grids_have_21_points() {
        let rho = GridSpec::default_rho_values();
        let alpha = GridSpec::default_alpha_values();
        assert_eq!(rho.len(), 21);
        assert_eq!(alpha.len(), 21);
        assert_eq!(rho[20], 1.0);
        assert_eq!(rho[10], 0.0);
        assert_eq!(alpha[10], 1.0);
        assert_eq!(alpha[0], 0.5);
        assert_eq!(alpha[20], 1.5);
    }

    #[test]
    fn grid_rejects_nonpositive_alpha() {
        let g = small_grid(vec![0.5], vec![1.0, -0.5], 10);
        assert!(matches!(
            mape_asset(&base(), &g),
            Err(TwinError::UnsupportedSimilarity(_))
        ));
        let g = small_grid(vec![1.2], vec![1.0], 10);
        assert!(mape_asset(&base(), &g).is_err());
        let g = small_grid(vec![0.5], vec![1.0], 0);
        assert!(mape_asset(&base(), &g).is_err());
    }

    #[test]
    fn perfect_twin_cell_is_zero() {
        let g = small_grid(vec![0.0, 1.0], vec![0.9, 1.0], 2_000);
        let out = mape_asset(&base(), &g).unwrap();
        assert!(out.mape(1, 1) <= 1e-8);
        assert!(out.mape(0, 1) > 0.1);
        assert!(out.mape(1, 0) > 0.0);
    }

    #[test]
    fn asset_mape_falls_with_rho() {
        let g = small_grid(vec![-1.0, -0.5, 0.0, 0.5, 0.9], vec![1.0], 5_000);
        let out = mape_asset(&base(), &g).unwrap();
        for w in out.grid.windows(2) {
            assert!(w[1][0] < w[0][0]);
        }
    }

    #[test]
    fn sigma_sweep_orders_and_repeats() {
        let g = small_grid(vec![0.5, 1.0], vec![0.8, 1.0], 3_000);
        let sweep = sigma_sweep(&base(), &[0.2, 0.4, 0.4], &g).unwrap();
        assert_eq!(sweep[1], sweep[2]);
        assert!(sweep[0].mape(0, 0) < sweep[1].mape(0, 0));
        assert!(sweep[0].mape(1, 1) <= 1e-8 && sweep[1].mape(1, 1) <= 1e-8);
        assert!(sigma_sweep(&base(), &[0.0], &g).is_err());
    }

    #[test]
    fn option_mape_is_asymmetric_in_rho() {
        let spec = OptionSpec::new(90.0, 0.25, 0.05).unwrap();
        let g = small_grid(vec![-0.5, 0.5], vec![1.0], 5_000);
        let out = mape_option(&base(), &spec, &g).unwrap();
        let (neg, pos) = (out.mape(0, 0), out.mape(1, 0));
        assert!(neg > pos + 2.0 * (out.se(0, 0) + out.se(1, 0)), "{neg} vs {pos}");
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let g = small_grid(vec![-0.3, 0.7, 1.0], vec![0.6, 1.0, 1.4], 4_000);
        let one = with_threads(Some(1), || mape_asset(&base(), &g)).unwrap().unwrap();
        let four = with_threads(Some(4), || mape_asset(&base(), &g)).unwrap().unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn cells_iterate_row_major() {
        let g = small_grid(vec![0.0, 1.0], vec![0.9, 1.0, 1.1], 10);
        let out = mape_asset(&base(), &g).unwrap();
        let cells: Vec<_> = out.cells().collect();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[4].0, cells[4].1), (1.0, 1.0));
        assert_eq!(out.rho_index(1.0), Some(1));
        assert_eq!(out.alpha_index(1.1), Some(2));
    }

    proptest! {
        #[test]
        fn alpha_round_trip(target in 0.01..10.0f64, mu_i in 0.01..2.0f64, si in 0.01..1.0f64, sj in 0.01..1.0f64) {
            let mu_j = alpha_to_mu_j(target, mu_i, si, sj).unwrap();
            let pair = TwinPair::new(
                AssetParams::new(mu_i, si, 10.0).unwrap(),
                AssetParams::new(mu_j, sj, 10.0).unwrap(),
                0.0,
            ).unwrap();
            let back = alpha(&pair).unwrap();
            prop_assert!(((back - target) / target).abs() < 1e-14);
        }
    }
}
