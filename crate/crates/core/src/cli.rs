//! Command-line front end: `simulate`, `price` and `mape`.
//!
//! Parameters resolve in order: command-line flag, then the `--config` file
//! (`key = value` lines, keys named like the long flags), then built-in
//! defaults. Output goes to `--out` (written atomically) or stdout.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::{simulate_paths, AssetParams, TwinPair};
use crate::error::TwinError;
use crate::harness::{
    alpha_to_mu_j, horizon_compare, mape_asset, mape_option, sigma_sweep, stepped_range, twin_price_stats,
    with_threads, GridSpec, MapeGrid, ASSET_REPLICATIONS, DEFAULT_SEED, OPTION_REPLICATIONS,
};
use crate::pricing::{bs_call, OptionSpec};
use crate::twin::{alpha, predict_path};
use crate::{ONE_DAY, ONE_MONTH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<TwinError> for CliError {
    fn from(e: TwinError) -> Self {
        match e {
            TwinError::Numerical(_) => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "twin-assets",
    version,
    about = "Price and track a nontraded asset through its twin"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate both paths and the one-step-ahead twin prediction of `j`.
    Simulate(SimulateArgs),
    /// Black-Scholes price of the call on `j` next to the Monte Carlo twin price.
    Price(PriceArgs),
    /// MAPE tables over (rho, alpha) grids.
    Mape(MapeArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, a count or "auto". Never changes the numbers.
    #[arg(long, global = true)]
    pub threads: Option<String>,
    /// Optional `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct PairArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu_i: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_i: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub spot_i: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub spot_j: Option<f64>,
    /// Return correlation.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Target alpha; sets mu_j from mu_i, sigma_i and sigma_j.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct OptionArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub strike: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    /// Time to maturity in years.
    #[arg(long, allow_hyphen_values = true)]
    pub maturity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pair: PairArgs,
    /// Number of steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Step size: "day", "month" or years.
    #[arg(long)]
    pub dt: Option<String>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub option: OptionArgs,
    /// Replications.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapeMode {
    Asset,
    Option,
    SigmaSweep,
    HorizonCompare,
}

impl FromStr for MapeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <MapeMode as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Args)]
pub struct MapeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub option: OptionArgs,
    #[arg(long, value_enum)]
    pub mode: Option<MapeMode>,
    /// Correlations: "start:stop:step" or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub rho_grid: Option<String>,
    /// Alphas: "start:stop:step" or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_grid: Option<String>,
    /// sigma_j values for sigma-sweep mode.
    #[arg(long)]
    pub sigma_grid: Option<String>,
    /// Replications per cell.
    #[arg(long)]
    pub n: Option<usize>,
    /// Horizon ("day", "month" or years); a comma list in horizon-compare mode.
    #[arg(long)]
    pub horizon: Option<String>,
}

/// Values read from a configuration file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "out",
    "threads",
    "mu-i",
    "sigma-i",
    "spot-i",
    "mu-j",
    "sigma-j",
    "spot-j",
    "rho",
    "alpha",
    "strike",
    "rate",
    "maturity",
    "steps",
    "dt",
    "n",
    "mode",
    "rho-grid",
    "alpha-grid",
    "sigma-grid",
    "horizon",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            values.insert(key, value.trim().trim_matches('"').to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    fn get_str(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }
}

/// Flag, then config, then default.
fn pick<T: FromStr>(flag: Option<T>, config: &ConfigFile, key: &str, default: T) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(config.get(key)?.unwrap_or(default)),
    }
}

fn pick_opt<T: FromStr>(flag: Option<T>, config: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(key),
    }
}

/// Parameter set used throughout the numerical illustration.
pub mod defaults {
    pub const MU_I: f64 = 0.4;
    pub const SIGMA_I: f64 = 0.2;
    pub const SPOT_I: f64 = 80.0;
    pub const MU_J: f64 = 0.8;
    /// Not given with the other values; 0.4 makes the set sit at alpha = 1.
    pub const SIGMA_J: f64 = 0.4;
    pub const SPOT_J: f64 = 90.0;
    pub const RHO: f64 = 0.9;
    pub const STRIKE: f64 = 90.0;
    pub const RATE: f64 = 0.05;
    pub const MATURITY: f64 = 0.25;
    pub const STEPS: usize = 252;
    pub const SIGMAS_J: [f64; 3] = [0.2, 0.4, 0.6];
}

/// "day", "month" or a number of years.
pub fn parse_horizon(s: &str) -> Result<f64, CliError> {
    let value = match s.trim().to_ascii_lowercase().as_str() {
        "day" => ONE_DAY,
        "month" => ONE_MONTH,
        other => other
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("horizon '{s}' is not 'day', 'month' or a number")))?,
    };
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("horizon must be positive, got '{s}'")))
    }
}

/// "start:stop:step" or "a,b,c".
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("grid '{s}': {what}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad("not a number"));
            Ok(stepped_range(num(start)?, num(stop)?, num(step)?)?)
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("not a number")))
            .collect(),
        _ => Err(bad("expected start:stop:step or a comma list")),
    }
}

fn parse_threads(s: Option<String>) -> Result<Option<usize>, CliError> {
    match s.as_deref().map(str::trim) {
        None | Some("auto") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "threads must be a positive count or 'auto', got '{v}'"
            ))),
        },
    }
}

struct Shared {
    config: ConfigFile,
    seed: u64,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

fn shared(common: CommonArgs) -> Result<Shared, CliError> {
    let config = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = pick(common.seed, &config, "seed", DEFAULT_SEED)?;
    let out = common.out.or_else(|| config.get_str("out").map(PathBuf::from));
    let threads = parse_threads(common.threads.or_else(|| config.get_str("threads")))?;
    Ok(Shared {
        config,
        seed,
        out,
        threads,
    })
}

fn build_pair(args: &PairArgs, config: &ConfigFile) -> Result<TwinPair, CliError> {
    let asset_i = AssetParams::new(
        pick(args.mu_i, config, "mu-i", defaults::MU_I)?,
        pick(args.sigma_i, config, "sigma-i", defaults::SIGMA_I)?,
        pick(args.spot_i, config, "spot-i", defaults::SPOT_I)?,
    )?;
    let sigma_j = pick(args.sigma_j, config, "sigma-j", defaults::SIGMA_J)?;
    let mu_j = match pick_opt(args.alpha, config, "alpha")? {
        Some(a) => alpha_to_mu_j(a, asset_i.mu, asset_i.sigma, sigma_j)?,
        None => pick(args.mu_j, config, "mu-j", defaults::MU_J)?,
    };
    let asset_j = AssetParams::new(mu_j, sigma_j, pick(args.spot_j, config, "spot-j", defaults::SPOT_J)?)?;
    Ok(TwinPair::new(
        asset_i,
        asset_j,
        pick(args.rho, config, "rho", defaults::RHO)?,
    )?)
}

fn build_option(args: &OptionArgs, config: &ConfigFile) -> Result<OptionSpec, CliError> {
    Ok(OptionSpec::new(
        pick(args.strike, config, "strike", defaults::STRIKE)?,
        pick(args.maturity, config, "maturity", defaults::MATURITY)?,
        pick(args.rate, config, "rate", defaults::RATE)?,
    )?)
}

/// Writes `contents` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

/// CSV `t,s_i,s_j,s_j_predicted`, one row per grid time including `t = 0`.
pub fn cmd_simulate(args: SimulateArgs) -> Result<String, CliError> {
    let shared = shared(args.common)?;
    let cfg = &shared.config;
    let pair = build_pair(&args.pair, cfg)?;
    let steps = pick(args.steps, cfg, "steps", defaults::STEPS)?;
    let dt = match args.dt.or_else(|| cfg.get_str("dt")) {
        Some(s) => parse_horizon(&s)?,
        None => ONE_DAY,
    };
    alpha(&pair)?;
    let paths = simulate_paths(&pair, steps, dt, shared.seed)?;
    let predicted = predict_path(&pair, &paths, shared.seed)?;

    let mut csv = String::from("t,s_i,s_j,s_j_predicted\n");
    for (k, s_j_hat) in predicted.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            paths.times[k], paths.path_i[k], paths.path_j[k], s_j_hat
        );
    }
    emit(shared.out.as_deref(), &csv)?;
    Ok(csv)
}

/// `key=value` record with the Black-Scholes and mean twin prices.
pub fn cmd_price(args: PriceArgs) -> Result<String, CliError> {
    let shared = shared(args.common)?;
    let cfg = &shared.config;
    let pair = build_pair(&args.pair, cfg)?;
    let spec = build_option(&args.option, cfg)?;
    let n = pick(args.n, cfg, "n", OPTION_REPLICATIONS)?;
    let a = alpha(&pair)?;
    let bs = bs_call(pair.asset_j.spot, &spec, pair.asset_j.sigma)?;
    let stats = with_threads(shared.threads, || twin_price_stats(&pair, &spec, n, shared.seed))??;

    let mut record = String::new();
    let _ = writeln!(record, "bs_price={bs:.10}");
    let _ = writeln!(record, "twin_price_mean={:.10}", stats.mean);
    let _ = writeln!(record, "twin_price_se={:.10}", stats.se);
    let _ = writeln!(record, "n={n}");
    let _ = writeln!(record, "rho={}", pair.rho);
    let _ = writeln!(record, "alpha={a}");
    let _ = writeln!(record, "seed={}", shared.seed);
    let _ = writeln!(record, "clipped={}", stats.clipped);
    emit(shared.out.as_deref(), &record)?;
    Ok(record)
}

fn grid_rows(csv: &mut String, prefix: Option<f64>, grid: &MapeGrid) {
    for (rho, alpha, mape, se) in grid.cells() {
        match prefix {
            Some(p) => writeln!(csv, "{p},{rho},{alpha},{mape},{se}"),
            None => writeln!(csv, "{rho},{alpha},{mape},{se}"),
        }
        .expect("writing to a String cannot fail");
    }
}

/// Long-format CSV `rho,alpha,mape,se`; sigma-sweep and horizon-compare
/// modes prepend a `sigma_j` or `horizon` column.
pub fn cmd_mape(args: MapeArgs) -> Result<String, CliError> {
    let shared = shared(args.common)?;
    let cfg = &shared.config;
    let pair = build_pair(&args.pair, cfg)?;
    let mode = pick(args.mode, cfg, "mode", MapeMode::Asset)?;

    let grid_values = |flag: Option<String>, key: &str, default: Vec<f64>| -> Result<Vec<f64>, CliError> {
        match flag.or_else(|| cfg.get_str(key)) {
            Some(s) => parse_grid(&s),
            None => Ok(default),
        }
    };
    let rho_values = grid_values(args.rho_grid, "rho-grid", GridSpec::default_rho_values())?;
    let alpha_values = grid_values(args.alpha_grid, "alpha-grid", GridSpec::default_alpha_values())?;
    let default_n = if mode == MapeMode::Option {
        OPTION_REPLICATIONS
    } else {
        ASSET_REPLICATIONS
    };
    let horizon_text = args.horizon.or_else(|| cfg.get_str("horizon"));
    let horizons: Vec<f64> = match (&horizon_text, mode) {
        (Some(s), _) => s.split(',').map(parse_horizon).collect::<Result<_, _>>()?,
        (None, MapeMode::HorizonCompare) => vec![ONE_DAY, ONE_MONTH],
        (None, _) => vec![ONE_DAY],
    };
    if mode != MapeMode::HorizonCompare && horizons.len() != 1 {
        return Err(CliError::Usage(
            "a horizon list is only accepted in horizon-compare mode".into(),
        ));
    }
    let grid = GridSpec {
        rho_values,
        alpha_values,
        n_replications: pick(args.n, cfg, "n", default_n)?,
        horizon: horizons[0],
        master_seed: shared.seed,
    };
    grid.validate()?;

    let mut csv = String::new();
    match mode {
        MapeMode::Asset => {
            let out = with_threads(shared.threads, || mape_asset(&pair, &grid))??;
            csv.push_str("rho,alpha,mape,se\n");
            grid_rows(&mut csv, None, &out);
        }
        MapeMode::Option => {
            let spec = build_option(&args.option, cfg)?;
            let out = with_threads(shared.threads, || mape_option(&pair, &spec, &grid))??;
            csv.push_str("rho,alpha,mape,se\n");
            grid_rows(&mut csv, None, &out);
        }
        MapeMode::SigmaSweep => {
            let sigmas = grid_values(args.sigma_grid, "sigma-grid", defaults::SIGMAS_J.to_vec())?;
            let out = with_threads(shared.threads, || sigma_sweep(&pair, &sigmas, &grid))??;
            csv.push_str("sigma_j,rho,alpha,mape,se\n");
            for (sigma, g) in sigmas.iter().zip(&out) {
                grid_rows(&mut csv, Some(*sigma), g);
            }
        }
        MapeMode::HorizonCompare => {
            let out = with_threads(shared.threads, || horizon_compare(&pair, &horizons, &grid))??;
            csv.push_str("horizon,rho,alpha,mape,se\n");
            for (h, g) in horizons.iter().zip(&out) {
                grid_rows(&mut csv, Some(*h), g);
            }
        }
    }
    emit(shared.out.as_deref(), &csv)?;
    Ok(csv)
}

pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Price(a) => cmd_price(a),
        Command::Mape(a) => cmd_mape(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print a single `error: <kind>: <message>` line to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = e.print();
            } else {
                let first = e.to_string();
                let line = first
                    .lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: ");
                eprintln!("error: usage: {line}");
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
