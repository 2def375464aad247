//! Experiment configuration documents.
//!
//! A configuration is a single JSON object. Unknown keys are rejected with
//! the offending key named, and every acceptance threshold lives here rather
//! than in the runners.

use elliprmt::measure::{radius_law_to_h2, DiscreteMeasure, NuRule, RadiusKind, RadiusLaw};
use elliprmt::sampler::{BulkRule, PopulationSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{McError, McResult};

/// Experiment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SpikeDist,
    EigvecOverlap,
    BilinearAs,
    BilinearClt,
    Vesd,
    QuadformOracle,
    GoeEntries,
}

impl ExperimentKind {
    /// Name used in configs and directory names.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SpikeDist => "spike-dist",
            ExperimentKind::EigvecOverlap => "eigvec-overlap",
            ExperimentKind::BilinearAs => "bilinear-as",
            ExperimentKind::BilinearClt => "bilinear-clt",
            ExperimentKind::Vesd => "vesd",
            ExperimentKind::QuadformOracle => "quadform-oracle",
            ExperimentKind::GoeEntries => "goe-entries",
        }
    }
}

/// Radius family with a `ν_p` growth rule, evaluated at each dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSpec {
    pub kind: RadiusKind,
    pub nu: NuRule,
}

impl RadiusSpec {
    /// Law at dimension `p`.
    pub fn at(&self, p: usize) -> McResult<RadiusLaw> {
        let forced = match self.kind {
            RadiusKind::Deterministic => Some(NuRule::Zero),
            RadiusKind::ChiSquare => Some(NuRule::TwoP),
            _ => None,
        };
        if let Some(rule) = forced.filter(|&r| r != self.nu) {
            return Err(McError::Config(format!(
                "radius kind {:?} requires nu \"{}\", got \"{}\"",
                self.kind,
                rule.label(),
                self.nu.label()
            )));
        }
        Ok(RadiusLaw::from_rule(self.kind, p, self.nu)?)
    }

    /// Limit of the normalized squared radius law as `p → ∞`.
    pub fn limit_h2(&self, p: usize) -> McResult<DiscreteMeasure> {
        if self.nu.is_light_tail() {
            Ok(DiscreteMeasure::dirac(1.0))
        } else {
            // With ν_p = p² both radius families are scale free in p.
            Ok(radius_law_to_h2(&self.at(p)?)?)
        }
    }
}

/// Population without its dimension, so that sweeps can resize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationTemplate {
    #[serde(default)]
    pub spikes: Vec<f64>,
    #[serde(default = "default_bulk")]
    pub bulk: BulkRule,
    #[serde(default = "default_rho")]
    pub toeplitz_rho: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_bulk() -> BulkRule {
    BulkRule::Constant { value: 1.0 }
}

fn default_rho() -> f64 {
    0.9
}

fn default_separation() -> f64 {
    0.1
}

impl Default for PopulationTemplate {
    fn default() -> Self {
        Self {
            spikes: Vec::new(),
            bulk: default_bulk(),
            toeplitz_rho: default_rho(),
            separation: default_separation(),
        }
    }
}

impl PopulationTemplate {
    /// Full specification at dimension `p`; an unseeded uniform bulk takes `seed`.
    pub fn at(&self, p: usize, seed: u64) -> PopulationSpec {
        PopulationSpec {
            p,
            spikes: self.spikes.clone(),
            bulk: self.bulk.clone(),
            toeplitz_rho: self.toeplitz_rho,
            separation: self.separation,
        }
        .with_bulk_seed(seed)
    }
}

/// Vectors entering the bilinear forms and projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeRule {
    /// Every vector is `e1`.
    SameBasis,
    /// First form on `e1`, second on `e2`.
    OrthogonalBasis,
    /// A seeded random orthonormal pair `(q1, q2)` and the single form `q1ᵀRq2`.
    RandomOrthogonal,
}

/// Test function for eigenvector statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    One,
    X,
    X2,
}

impl Statistic {
    /// Column label.
    pub fn label(self) -> &'static str {
        match self {
            Statistic::One => "one",
            Statistic::X => "x",
            Statistic::X2 => "x2",
        }
    }

    /// Value at a real point.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Statistic::One => 1.0,
            Statistic::X => x,
            Statistic::X2 => x * x,
        }
    }

    /// Value at a complex point.
    pub fn eval_c(self, z: Complex64) -> Complex64 {
        match self {
            Statistic::One => Complex64::new(1.0, 0.0),
            Statistic::X => z,
            Statistic::X2 => z * z,
        }
    }
}

/// Pass/fail bounds used by the summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Bound on |empirical − theory| / SE for means and covariances.
    pub z_max: f64,
    /// Bound on the relative error of variances against theory.
    pub var_rel_tol: f64,
    /// Lower bound on variance ratios.
    pub var_ratio_lo: f64,
    /// Upper bound on variance ratios.
    pub var_ratio_hi: f64,
    /// Bound on the Kolmogorov–Smirnov statistic against the standard normal.
    pub ks_max: f64,
    /// Bound on |mean overlap² − theory|.
    pub overlap_abs: f64,
    /// Bound on the mean deviation from the deterministic equivalent.
    pub deviation_max: f64,
    /// Bound on the relative change of quadrature values under node doubling.
    pub self_convergence: f64,
    /// Bound on the quadratic-form oracle z-scores.
    pub oracle_z_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            z_max: 3.0,
            var_rel_tol: 0.15,
            var_ratio_lo: 0.85,
            var_ratio_hi: 1.15,
            ks_max: 0.05,
            overlap_abs: 0.02,
            deviation_max: 0.08,
            self_convergence: 1e-4,
            oracle_z_max: 5.0,
        }
    }
}

fn default_hist_bins() -> usize {
    40
}

fn default_quad_nodes() -> usize {
    100
}

fn default_draws() -> usize {
    1_000_000
}

fn default_z_margin() -> f64 {
    0.1
}

fn default_statistics() -> Vec<Statistic> {
    vec![Statistic::One, Statistic::X, Statistic::X2]
}

fn default_probes() -> ProbeRule {
    ProbeRule::SameBasis
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    /// Master seed; the CLI falls back on `ELLIPRMT_SEED` when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    pub radius: RadiusSpec,
    #[serde(default)]
    pub population: PopulationTemplate,
    /// Spectral arguments as `[re, im]` pairs.
    #[serde(default)]
    pub z_points: Vec<[f64; 2]>,
    /// Dimension sweep at fixed `p/n` for overlap experiments.
    #[serde(default)]
    pub grid: Vec<usize>,
    #[serde(default = "default_probes")]
    pub probes: ProbeRule,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_hist_bins")]
    pub hist_bins: usize,
    /// Quadrature nodes per contour side.
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    /// Sphere draws per matrix pair in the quadratic-form oracle.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Minimum distance of spectral arguments from the limiting support.
    #[serde(default = "default_z_margin")]
    pub z_margin: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> McResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| McError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides with dotted paths, then parses.
    ///
    /// Values are read as JSON when possible and as strings otherwise.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> McResult<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text).map_err(|e| McError::Config(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| McError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> McResult<()> {
        let bad = |m: String| Err(McError::Config(m));
        if self.reps < 1 {
            return bad("reps must be at least 1".into());
        }
        if self.p < 2 || self.n < 2 {
            return bad(format!("p and n must be at least 2, got p = {}, n = {}", self.p, self.n));
        }
        for &p in self.dimensions().iter() {
            if p < 2 {
                return bad(format!("grid dimension {p} is below 2"));
            }
            self.radius.at(p).map_err(|e| McError::Config(format!("radius at p = {p}: {e}")))?;
        }
        if self.hist_bins == 0 {
            return bad("hist_bins must be positive".into());
        }
        if self.quad_nodes < 2 {
            return bad("quad_nodes must be at least 2".into());
        }
        if self.draws < 2 {
            return bad("draws must be at least 2".into());
        }
        if self.z_points.iter().flatten().any(|v| !v.is_finite()) {
            return bad("z_points must be finite".into());
        }
        let needs_spikes = matches!(
            self.kind,
            ExperimentKind::SpikeDist | ExperimentKind::EigvecOverlap | ExperimentKind::GoeEntries
        );
        if needs_spikes && self.population.spikes.is_empty() {
            return bad(format!("{} needs at least one spike", self.kind.name()));
        }
        if self.kind == ExperimentKind::GoeEntries && self.population.spikes.len() < 2 {
            return bad("goe-entries needs at least two spikes for off-diagonal entries".into());
        }
        if matches!(self.kind, ExperimentKind::BilinearAs | ExperimentKind::BilinearClt) && self.z_points.is_empty() {
            return bad(format!("{} needs z_points", self.kind.name()));
        }
        if self.kind == ExperimentKind::Vesd && self.statistics.is_empty() {
            return bad("vesd needs at least one statistic".into());
        }
        Ok(())
    }

    /// `p / n`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Dimensions visited: the grid, or `p` alone.
    pub fn dimensions(&self) -> Vec<usize> {
        if self.grid.is_empty() {
            vec![self.p]
        } else {
            self.grid.clone()
        }
    }

    /// Sample size paired with dimension `p` at the configured ratio.
    pub fn n_for(&self, p: usize) -> usize {
        if p == self.p {
            self.n
        } else {
            ((p as f64) / self.ratio()).round().max(2.0) as usize
        }
    }

    /// Spectral arguments as complex numbers.
    pub fn z_values(&self) -> Vec<Complex64> {
        self.z_points.iter().map(|z| Complex64::new(z[0], z[1])).collect()
    }

    /// Seed, or an error when none was supplied.
    pub fn seed(&self) -> McResult<u64> {
        self.seed
            .ok_or_else(|| McError::Config("no seed: set `seed` in the config or ELLIPRMT_SEED".into()))
    }
}

fn apply_override(doc: &mut serde_json::Value, ov: &str) -> McResult<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| McError::Config(format!("override `{ov}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| McError::Config(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            // Keep string-typed fields as strings, e.g. `radius.nu=0`.
            let value = match obj.get(*part) {
                Some(serde_json::Value::String(_)) => serde_json::Value::String(raw.to_string()),
                _ => value,
            };
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(McError::Config(format!("override `{ov}` has an empty key")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"kind":"spike-dist","p":50,"n":100,"reps":10,"seed":1,
        "radius":{"kind":"two-point","nu":"p2"},"population":{"spikes":[8.0],"bulk":{"kind":"uniform"}}}"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::SpikeDist);
        assert_eq!(cfg.thresholds, Thresholds::default());
        assert_eq!(cfg.population.toeplitz_rho, 0.9);
        assert_eq!(cfg.dimensions(), vec![50]);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = BASE.replace("\"reps\"", "\"repz\":3,\"reps\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("repz"), "{err}");
        let text = BASE.replace("\"spikes\"", "\"spikez\":[],\"spikes\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("spikez"), "{err}");
    }

    #[test]
    fn invariants_enforced() {
        for (k, v) in [("reps", "0"), ("p", "1"), ("n", "1")] {
            let err = ExperimentConfig::from_json_with_overrides(BASE, &[format!("{k}={v}")]).unwrap_err();
            assert!(matches!(err, McError::Config(_)));
        }
        let err = ExperimentConfig::from_json_with_overrides(BASE, &["population.spikes=[]".into()]);
        assert!(err.is_err());
        let err = ExperimentConfig::from_json_with_overrides(BASE, &["radius.kind=deterministic".into()]);
        assert!(err.is_err());
    }

    #[test]
    fn overrides_nested_values() {
        let cfg = ExperimentConfig::from_json_with_overrides(
            BASE,
            &["reps=7".into(), "radius.nu=0".into(), "radius.kind=deterministic".into(), "thresholds.ks_max=0.1".into()],
        )
        .unwrap();
        assert_eq!(cfg.reps, 7);
        assert_eq!(cfg.radius.nu, NuRule::Zero);
        assert_eq!(cfg.thresholds.ks_max, 0.1);
        assert!(ExperimentConfig::from_json_with_overrides(BASE, &["noequals".into()]).is_err());
    }

    #[test]
    fn sweep_keeps_ratio() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.grid = vec![64, 96];
        assert_eq!(cfg.n_for(64), 128);
        assert_eq!(cfg.n_for(96), 192);
    }
}
