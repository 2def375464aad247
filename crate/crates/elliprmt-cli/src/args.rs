//! Argument definitions and parsers for the `elliprmt` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use elliprmt::DiscreteMeasure;
use num_complex::Complex64;

use crate::error::{CliError, CliResult};

/// Limiting spectra, spike predictions and Monte Carlo checks for
/// elliptically distributed sample covariance matrices.
#[derive(Debug, Parser)]
#[command(name = "elliprmt", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Limiting spectral distribution.
    #[command(subcommand)]
    Lsd(LsdCommand),
    /// Spiked eigenvalue and eigenvector predictions.
    #[command(subcommand)]
    Spike(SpikeCommand),
    /// Runs a Monte Carlo experiment from a JSON config.
    Mc(McArgs),
    /// Renders a histogram or an x/y table as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum LsdCommand {
    /// Solves the fixed-point system at one spectral argument.
    Solve(SolveArgs),
    /// Inverts the Stieltjes transform on a grid.
    Density(DensityArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpikeCommand {
    /// Predicts the outlier location and fluctuations for one spike.
    Predict(PredictArgs),
}

/// The triple `(c, H1, H2)`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Dimension ratio p/n.
    #[arg(long)]
    pub c: f64,
    /// Population spectrum: `delta:x`, `file:path` or a CSV path with header `atom,weight`.
    #[arg(long)]
    pub h1: String,
    /// Radius law of ρ²/√m_p, in the same format as --h1.
    #[arg(long)]
    pub h2: String,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Spectral argument as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    /// Absolute residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid as `lo:hi:steps`; `steps` intervals give `steps + 1` points.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Distance of the evaluation line from the real axis.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Output CSV with columns `x,density,cdf`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Spike strength α.
    #[arg(long)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config and ELLIPRMT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory; defaults to `runs/<kind>-<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config override `dotted.key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Histogram CSV with `bin_left,bin_right,count` columns.
    #[arg(long, conflicts_with = "xy", required_unless_present = "xy")]
    pub hist: Option<PathBuf>,
    /// Table with a header row, plotted as points.
    #[arg(long)]
    pub xy: Option<PathBuf>,
    /// theory.json whose `gaussian_overlay` is drawn over the histogram.
    #[arg(long)]
    pub theory: Option<PathBuf>,
    /// Column used for x in --xy mode; defaults to the first column.
    #[arg(long)]
    pub x: Option<String>,
    /// Column used for y in --xy mode; defaults to the second column.
    #[arg(long)]
    pub y: Option<String>,
    /// Optional column drawn as a line over the points.
    #[arg(long)]
    pub line: Option<String>,
    /// Optional column of standard errors drawn as bars.
    #[arg(long)]
    pub yerr: Option<String>,
    /// Plot title.
    #[arg(long, default_value = "")]
    pub title: String,
    /// Output SVG path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `re,im`, or a bare real number.
pub fn parse_complex(s: &str) -> CliResult<Complex64> {
    let bad = || CliError::Usage(format!("cannot parse `{s}` as a complex number `re,im`"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(bad()),
    }
}

/// Parses `lo:hi:steps` into `steps + 1` equispaced points.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = |why: &str| CliError::Usage(format!("bad grid `{s}`: {why}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err(bad("expected lo:hi:steps"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let steps: usize = steps.trim().parse().map_err(|_| bad("steps is not a nonnegative integer"))?;
    if steps == 0 {
        return Err(bad("steps must be at least 1"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(bad("need finite lo < hi"));
    }
    Ok((0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect())
}

/// Parses a measure given as `delta:x`, `file:path` or a bare CSV path.
pub fn parse_measure(s: &str) -> CliResult<DiscreteMeasure> {
    if let Some(x) = s.strip_prefix("delta:") {
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("cannot parse point mass location in `{s}`")))?;
        if !(x.is_finite() && x >= 0.0) {
            return Err(CliError::Usage(format!("point mass location must be finite and nonnegative, got {x}")));
        }
        return Ok(DiscreteMeasure::dirac(x));
    }
    let path = s.strip_prefix("file:").unwrap_or(s);
    DiscreteMeasure::from_csv_path(std::path::Path::new(path))
        .map_err(|e| CliError::Usage(format!("measure `{path}`: {e}")))
}
