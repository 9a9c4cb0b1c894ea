//! Flag grammar. Numeric flags are range-checked here so bad values exit
//! with a usage error before any work starts.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use nisim_core::decision::{ChainConstants, Target2x2};
use nisim_core::rounding::StatsMode;

#[derive(Parser, Debug)]
#[command(name = "nisim", version, about = "Non-interactive simulation of joint distributions")]
pub struct Cli {
    /// Worker threads for searches and sampling [default: all cores]
    #[arg(long, global = true, value_parser = positive_usize)]
    pub threads: Option<usize>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Maximal correlation with witnesses and the DSBS bounds
    Maxcorr {
        /// Joint distribution file
        dist: PathBuf,
    },
    /// Lower and upper DSBS correlation bounds from the maximal correlation
    Bounds {
        /// Joint distribution file
        #[arg(long)]
        dist: PathBuf,
    },
    /// Fourier summaries of a function file
    Fourier {
        /// Function file (values or coefficients)
        function: PathBuf,
        /// Comma list of influences, tail:<d>, mean, var
        #[arg(long, value_delimiter = ',', value_parser = report, default_value = "influences,mean,var")]
        report: Vec<Report>,
    },
    /// Probability that a random restriction of the high-influence set is regular
    Regularity {
        /// Function file (values or coefficients)
        function: PathBuf,
        /// Degree cutoff
        #[arg(long)]
        d: usize,
        /// Influence threshold in (0, 1)
        #[arg(long, value_parser = open_unit)]
        tau: f64,
        /// Enumerate every restriction
        #[arg(long, conflicts_with = "mc")]
        exact: bool,
        /// Sample this many restrictions instead
        #[arg(long, value_parser = at_least_two)]
        mc: Option<u64>,
        /// Seed for sampling
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parameter chain and the sufficient dimension n0
    N0 {
        /// Joint distribution file
        #[arg(long)]
        dist: PathBuf,
        /// Gap in (0, 1)
        #[arg(long, value_parser = open_unit)]
        delta: f64,
        /// Chain constants, e.g. C_smooth=1,C_tau=1,C_be=1
        #[arg(long, value_parser = constants, default_value = "C_smooth=1,C_tau=1,C_be=1")]
        constants: Constants,
    },
    /// Gap decision by exhaustive search over grid strategies
    Decide {
        /// Joint distribution file
        #[arg(long)]
        dist: PathBuf,
        /// dsbs:<rho> or 2x2:<p++>,<p+->,<p-+>,<p-->
        #[arg(long, value_parser = target)]
        target: Target2x2,
        /// Gap in (0, 1)
        #[arg(long, value_parser = open_unit)]
        delta: f64,
        /// Largest search depth
        #[arg(long, value_parser = positive_usize)]
        n: usize,
        /// Attach n0 to the verdict
        #[arg(long)]
        report_n0: bool,
        /// Chain constants used for n0
        #[arg(long, value_parser = constants, default_value = "C_smooth=1,C_tau=1,C_be=1")]
        constants: Constants,
        /// Cap on branch-and-bound nodes per depth
        #[arg(long, value_parser = positive_u64, default_value_t = 200_000_000)]
        work_cap: u64,
    },
    /// Moments and output law of a strategy pair
    Simulate {
        /// Joint distribution file
        #[arg(long)]
        dist: PathBuf,
        /// Strategy or function file for the row party
        #[arg(long)]
        f: PathBuf,
        /// Strategy or function file for the column party
        #[arg(long)]
        g: PathBuf,
        /// Monte Carlo samples when enumeration is off or too large
        #[arg(long, value_parser = at_least_two, default_value_t = 100_000)]
        samples: u64,
        /// Seed for sampling
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report the TV distance to this target
        #[arg(long, value_parser = target)]
        target: Option<Target2x2>,
        /// Enumerate (exact), sample (mc), or enumerate when small (auto)
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
    /// Bundled source distributions
    Examples {
        /// Corpus entry
        #[arg(long, value_parser = ["triple", "dsbs", "alpha-graph"])]
        name: String,
        /// Correlation for dsbs [default: 0.5]
        #[arg(long, value_parser = closed_signed_unit, conflicts_with = "alpha")]
        rho: Option<f64>,
        /// Matched-block mass for alpha-graph [default: 0.25]
        #[arg(long, value_parser = open_unit)]
        alpha: Option<f64>,
        /// Low-block correlation for alpha-graph, in [0, 1)
        #[arg(long, value_parser = half_open_unit, default_value_t = 0.0)]
        low_corr: f64,
        /// Also write the distribution file here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Maxcorr { .. } => "maxcorr",
            Command::Bounds { .. } => "bounds",
            Command::Fourier { .. } => "fourier",
            Command::Regularity { .. } => "regularity",
            Command::N0 { .. } => "n0",
            Command::Decide { .. } => "decide",
            Command::Simulate { .. } => "simulate",
            Command::Examples { .. } => "examples",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Command::Regularity { seed, .. } | Command::Simulate { seed, .. } => *seed,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Report {
    Influences,
    Tail(usize),
    Mean,
    Var,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Auto,
    Exact,
    Mc,
}

impl From<Mode> for StatsMode {
    fn from(m: Mode) -> StatsMode {
        match m {
            Mode::Auto => StatsMode::Auto,
            Mode::Exact => StatsMode::Exact,
            Mode::Mc => StatsMode::MonteCarlo,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constants(pub ChainConstants);

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not finite"))
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn half_open_unit(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn closed_signed_unit(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (-1.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [-1, 1]"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    match s.trim().parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn at_least_two(s: &str) -> Result<u64, String> {
    match s.trim().parse::<u64>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("{s:?} is not an integer of at least 2")),
    }
}

fn target(s: &str) -> Result<Target2x2, String> {
    s.parse().map_err(|e: nisim_core::Error| e.to_string())
}

fn report(s: &str) -> Result<Report, String> {
    match s.trim() {
        "influences" => Ok(Report::Influences),
        "mean" => Ok(Report::Mean),
        "var" => Ok(Report::Var),
        t => match t.strip_prefix("tail:").map(|d| d.parse::<usize>()) {
            Some(Ok(d)) => Ok(Report::Tail(d)),
            _ => Err(format!("{t:?} is not one of influences, tail:<d>, mean, var")),
        },
    }
}

fn constants(s: &str) -> Result<Constants, String> {
    let mut c = ChainConstants::default();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("{part:?} is not NAME=VALUE"))?;
        let v = number(v)?;
        if v <= 0.0 {
            return Err(format!("constant {k} must be positive"));
        }
        match k.trim() {
            "C_smooth" => c.c_smooth = v,
            "C_tau" => c.c_tau = v,
            "C_be" => c.c_be = v,
            other => return Err(format!("unknown constant {other:?}; expected C_smooth, C_tau, C_be")),
        }
    }
    Ok(Constants(c))
}
