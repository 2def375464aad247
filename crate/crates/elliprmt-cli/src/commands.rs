//! Command handlers. Each returns the text destined for stdout.

use std::path::{Path, PathBuf};

use elliprmt::lsd::{conjugate, SolverOptions};
use elliprmt::{predict, LsdModel};
use elliprmt_mc::{run_with_jobs, ExperimentConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    parse_complex, parse_grid, parse_measure, Command, DensityArgs, LsdCommand, McArgs, ModelArgs, PlotArgs,
    PredictArgs, SolveArgs, SpikeCommand,
};
use crate::error::{CliError, CliResult};
use crate::plot::{histogram_svg, series_svg, Bar, Gaussian, Series};

/// Environment variable consulted when neither `--seed` nor the config sets a seed.
pub const SEED_ENV: &str = "ELLIPRMT_SEED";

/// Output of a command: stdout text and warnings for stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub warnings: Vec<String>,
    /// Set when results were written but some evaluations failed.
    pub numerical_failure: Option<String>,
}

impl Output {
    fn text(stdout: String) -> Self {
        Self { stdout, ..Default::default() }
    }
}

/// Dispatches a parsed command line.
pub fn execute(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Lsd(LsdCommand::Solve(a)) => lsd_solve(a),
        Command::Lsd(LsdCommand::Density(a)) => lsd_density(a),
        Command::Spike(SpikeCommand::Predict(a)) => spike_predict(a),
        Command::Mc(a) => mc(a, std::env::var(SEED_ENV).ok()),
        Command::Plot(a) => plot(a),
    }
}

fn model(a: &ModelArgs) -> CliResult<LsdModel> {
    let h1 = parse_measure(&a.h1)?;
    let h2 = parse_measure(&a.h2)?;
    Ok(LsdModel::new(a.c, h1, h2)?)
}

fn pretty<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// `lsd solve`: the solution as JSON.
pub fn lsd_solve(a: &SolveArgs) -> CliResult<Output> {
    let model = model(&a.model)?;
    let z = parse_complex(&a.z)?;
    if !(a.tol > 0.0) || a.max_iter == 0 {
        return Err(CliError::Usage("--tol must be positive and --max-iter at least 1".into()));
    }
    let opts = SolverOptions { tol: a.tol, max_iter: a.max_iter, ..SolverOptions::default() };
    let sol = if z.im > 0.0 {
        model.solve(z, &opts)?
    } else if z.im < 0.0 {
        conjugate(&model.solve(z.conj(), &opts)?)
    } else {
        model.solve_real(z.re)?
    };
    Ok(Output::text(pretty(&sol)?))
}

/// `lsd density`: writes `x,density,cdf` and reports the support.
pub fn lsd_density(a: &DensityArgs) -> CliResult<Output> {
    let model = model(&a.model)?;
    let grid = parse_grid(&a.grid)?;
    if !(1e-5..=1e-2).contains(&a.eps) {
        return Err(CliError::Usage(format!("--eps must lie in [1e-5, 1e-2], got {}", a.eps)));
    }
    let mut failures = Vec::new();
    let density = match model.stieltjes_invert(&grid, a.eps) {
        Ok(d) => d,
        Err(e @ elliprmt::Error::InvalidInput(_)) => return Err(e.into()),
        Err(_) => {
            // Retry point by point so that every failing abscissa is listed.
            let mut ok = Vec::new();
            for &x in &grid {
                match model.stieltjes_invert(&[x], a.eps) {
                    Ok(d) => ok.push((x, d.density[0], d.point_mass_at_zero)),
                    Err(e) => failures.push(json!({"x": x, "error": e.to_string()})),
                }
            }
            let mut d = elliprmt::lsd::SpectralDensity {
                x: ok.iter().map(|r| r.0).collect(),
                density: ok.iter().map(|r| r.1).collect(),
                cdf: Vec::new(),
                point_mass_at_zero: ok.first().map_or(0.0, |r| r.2),
                eps: a.eps,
            };
            let mut acc = 0.0;
            for i in 0..d.x.len() {
                if i > 0 {
                    acc += 0.5 * (d.density[i] + d.density[i - 1]) * (d.x[i] - d.x[i - 1]);
                }
                d.cdf.push(acc + if d.x[i] >= 0.0 { d.point_mass_at_zero } else { 0.0 });
            }
            d
        }
    };
    write_file(&a.out, |f| density.to_csv_writer(f).map_err(CliError::from))?;
    let support = if model.is_trivial() {
        Value::Null
    } else {
        match model.support() {
            Ok(s) => json!({"lower": s.lower, "upper": s.upper}),
            Err(e) => {
                failures.push(json!({"x": Value::Null, "error": format!("support detection: {e}")}));
                Value::Null
            }
        }
    };
    let report = json!({
        "out": a.out.display().to_string(),
        "points": density.x.len(),
        "eps": a.eps,
        "support": support,
        "point_mass_at_zero": density.point_mass_at_zero,
        "failures": failures,
    });
    let mut out = Output::text(pretty(&report)?);
    if !failures.is_empty() {
        out.numerical_failure = Some(format!("{} evaluation(s) failed; see `failures`", failures.len()));
    }
    Ok(out)
}

fn write_file(path: &Path, f: impl FnOnce(std::fs::File) -> CliResult<()>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    f(file)
}

/// `spike predict`: the prediction as JSON.
pub fn spike_predict(a: &PredictArgs) -> CliResult<Output> {
    let model = model(&a.model)?;
    if !(a.alpha.is_finite() && a.alpha > 0.0) {
        return Err(CliError::Usage(format!("--alpha must be positive, got {}", a.alpha)));
    }
    Ok(Output::text(pretty(&predict(&model, a.alpha)?)?))
}

/// Seed precedence: `--seed`, then the config, then the environment.
fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<String>) -> CliResult<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if config.is_some() {
        return Ok(config);
    }
    env.map(|v| {
        v.trim()
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))
    })
    .transpose()
}

/// `mc`: runs the experiment, writes its directory and prints the checks.
pub fn mc(a: &McArgs, env_seed: Option<String>) -> CliResult<Output> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    let mut cfg = ExperimentConfig::from_json_with_overrides(&text, &a.overrides)?;
    cfg.seed = resolve_seed(a.seed, cfg.seed, env_seed)?;
    let seed = cfg.seed()?;
    let result = run_with_jobs(&cfg, a.jobs)?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{seed}", cfg.kind.name())));
    result.write_to(&dir)?;

    let s = &result.summary;
    let mut text = format!(
        "{} p={} n={} reps={} seed={} failed replicates={}\n",
        cfg.kind.name(),
        s.p,
        s.n,
        s.reps,
        s.seed,
        s.failures
    );
    for c in &s.comparisons {
        text += &format!(
            "  {:<36} empirical {:>12.6} theory {:>12.6} z {:>7.2}\n",
            c.name, c.empirical, c.theory, c.z_score
        );
    }
    for c in &s.checks {
        text += &format!(
            "  [{}] {:<32} {:.6} in [{}, {}]\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            bound(c.lower),
            bound(c.upper)
        );
    }
    text += &format!("wrote {}\n", dir.display());
    let mut out = Output::text(text);
    out.warnings = s.warnings.clone();
    Ok(out)
}

fn bound(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    if header.is_empty() || rows.is_empty() {
        return Err(CliError::Usage(format!("{}: table has no data rows", path.display())));
    }
    Ok((header, rows))
}

fn column(path: &Path, header: &[String], rows: &[Vec<String>], name: &str) -> CliResult<Vec<f64>> {
    let k = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Usage(format!("{}: no column `{name}`", path.display())))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.get(k).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
                CliError::Usage(format!("{}: line {}: column `{name}` is not a number", path.display(), i + 2))
            })
        })
        .collect()
}

fn overlay(path: &Path) -> CliResult<Option<Gaussian>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)?;
    let g = &v["gaussian_overlay"];
    Ok(match (g["mean"].as_f64(), g["sd"].as_f64()) {
        (Some(mean), Some(sd)) if sd > 0.0 => Some(Gaussian { mean, sd }),
        _ => None,
    })
}

/// `plot`: writes an SVG histogram or point chart.
pub fn plot(a: &PlotArgs) -> CliResult<Output> {
    let svg = if let Some(path) = &a.hist {
        let (header, rows) = read_table(path)?;
        let left = column(path, &header, &rows, "bin_left")?;
        let right = column(path, &header, &rows, "bin_right")?;
        let count = column(path, &header, &rows, "count")?;
        let total: f64 = count.iter().sum();
        if !(total > 0.0) {
            return Err(CliError::Usage(format!("{}: histogram is empty", path.display())));
        }
        let bars: Vec<Bar> = (0..rows.len())
            .map(|i| {
                let w = right[i] - left[i];
                let height = if w > 0.0 { count[i] / (total * w) } else { 0.0 };
                Bar { left: left[i], right: right[i], height }
            })
            .collect();
        let g = a.theory.as_deref().map(overlay).transpose()?.flatten();
        histogram_svg(&bars, g, &a.title, "value")
    } else if let Some(path) = &a.xy {
        let (header, rows) = read_table(path)?;
        let pick = |opt: &Option<String>, k: usize| -> CliResult<String> {
            match opt {
                Some(name) => Ok(name.clone()),
                None => header
                    .get(k)
                    .cloned()
                    .ok_or_else(|| CliError::Usage(format!("{}: need at least two columns", path.display()))),
            }
        };
        let (xn, yn) = (pick(&a.x, 0)?, pick(&a.y, 1)?);
        let series = Series {
            x: column(path, &header, &rows, &xn)?,
            y: column(path, &header, &rows, &yn)?,
            yerr: a.yerr.as_deref().map(|c| column(path, &header, &rows, c)).transpose()?,
            line: a.line.as_deref().map(|c| column(path, &header, &rows, c)).transpose()?,
            x_label: xn,
            y_label: yn,
        };
        series_svg(&series, &a.title)
    } else {
        return Err(CliError::Usage("one of --hist or --xy is required".into()));
    };
    write_file(&a.out, |mut f| {
        use std::io::Write;
        f.write_all(svg.as_bytes()).map_err(CliError::from)
    })?;
    Ok(Output::text(format!("wrote {}\n", a.out.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3".into())).unwrap(), Some(1));
        assert_eq!(resolve_seed(None, Some(2), Some("3".into())).unwrap(), Some(2));
        assert_eq!(resolve_seed(None, None, Some("3".into())).unwrap(), Some(3));
        assert_eq!(resolve_seed(None, None, None).unwrap(), None);
        assert_eq!(resolve_seed(None, None, Some("x".into())).unwrap_err().exit_code(), 1);
    }
}
