//! Finite discrete measures for the population spectrum `H1` and the
//! normalized squared-radius law `H2`, plus the radius laws that generate `H2`.
//!
//! A measure is stored as sorted atoms with positive weights summing to one.
//! Duplicate atoms are merged on construction, so integrals never depend on
//! how a measure was assembled.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma as GammaDist};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};

/// Number of equal-probability cells used to discretize continuous radius laws.
pub const QUANTILE_ATOMS: usize = 512;

/// Tolerance on the total mass accepted by [`DiscreteMeasure::new`].
const MASS_TOL: f64 = 1e-9;

/// Weighted atoms on the real line with total mass one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from parallel atom and weight lists.
    ///
    /// Atoms are sorted and exact duplicates merged. Zero-weight atoms are
    /// dropped. The weights must sum to one within `1e-9`; they are then
    /// renormalized so the stored mass is one to rounding.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidInput("measure has no atoms".into()));
        }
        for (i, (&a, &w)) in atoms.iter().zip(&weights).enumerate() {
            if !a.is_finite() {
                return Err(Error::InvalidInput(format!("atom {i} is not finite: {a}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidInput(format!("weight {i} is invalid: {w}")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&last) if last == a => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { atoms, weights })
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    /// Equal weights on the given values, e.g. the ESD of a matrix.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::new(values.to_vec(), vec![w; values.len()])
    }

    /// Sorted distinct atoms.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Weights matching [`atoms`](Self::atoms).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of distinct atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// Always false for a constructed measure.
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Iterates over `(atom, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// Smallest atom.
    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    /// Largest atom.
    pub fn max(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// True when the measure is the point mass at zero.
    pub fn is_zero_dirac(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0] == 0.0
    }

    /// True when the measure is the point mass at one.
    pub fn is_unit_dirac(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0] == 1.0
    }

    /// Mass carried by the atom equal to `x`.
    pub fn mass_at(&self, x: f64) -> f64 {
        self.iter().filter(|&(a, _)| a == x).map(|(_, w)| w).sum()
    }

    /// Real integral of `f`.
    pub fn integrate_real(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).sum()
    }

    /// Complex integral of `f` without finiteness checks; used in solver loops.
    #[inline]
    pub fn integrate_unchecked(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            acc += f(a) * w;
        }
        acc
    }

    /// First moment.
    pub fn mean(&self) -> f64 {
        self.integrate_real(|x| x)
    }

    /// Second moment.
    pub fn second_moment(&self) -> f64 {
        self.integrate_real(|x| x * x)
    }

    /// Reads a two-column `atom,weight` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "atom" || &headers[1] != "weight" {
            return Err(Error::Csv(format!(
                "line 1: expected header `atom,weight`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 2 {
                return Err(Error::Csv(format!(
                    "line {line}: expected 2 fields, found {}",
                    rec.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Csv(format!("line {line}: cannot parse `{s}` as a number")))
            };
            atoms.push(parse(&rec[0])?);
            weights.push(parse(&rec[1])?);
        }
        Self::new(atoms, weights)
    }

    /// Reads a measure from a CSV file.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    /// Writes the measure as `atom,weight` CSV.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["atom", "weight"])?;
        for (a, w) in self.iter() {
            wtr.write_record([format!("{a:e}"), format!("{w:e}")])?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Evaluates `∫ f dμ`, failing on the first atom where `f` is not finite.
pub fn measure_integral(mu: &DiscreteMeasure, f: impl Fn(f64) -> Complex64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, w) in mu.iter() {
        let v = f(a);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Domain(format!("integrand is not finite at atom {a}")));
        }
        acc += v * w;
    }
    Ok(acc)
}

/// Family of the squared radius `ρ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusKind {
    /// `ρ² = p` exactly.
    Deterministic,
    /// `ρ² = p ± √ν_p` with probability one half each.
    TwoPoint,
    /// `ρ² ~ χ²_p`, the Gaussian case; forces `ν_p = 2p`.
    ChiSquare,
    /// `ρ² ~ Gamma(p²/ν_p, ν_p/p)`; unbounded support.
    Gamma,
}

/// Growth rule for the radius variance `ν_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NuRule {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "sqrt_p")]
    SqrtP,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "p2")]
    PSquared,
    #[serde(rename = "2p")]
    TwoP,
}

impl NuRule {
    /// Every rule, in heavy-to-light order.
    pub const ALL: [NuRule; 5] = [
        NuRule::PSquared,
        NuRule::TwoP,
        NuRule::P,
        NuRule::SqrtP,
        NuRule::Zero,
    ];

    /// Value of `ν_p` at dimension `p`.
    pub fn eval(self, p: usize) -> f64 {
        let p = p as f64;
        match self {
            NuRule::Zero => 0.0,
            NuRule::SqrtP => p.sqrt(),
            NuRule::P => p,
            NuRule::PSquared => p * p,
            NuRule::TwoP => 2.0 * p,
        }
    }

    /// Short label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            NuRule::Zero => "0",
            NuRule::SqrtP => "sqrt_p",
            NuRule::P => "p",
            NuRule::PSquared => "p2",
            NuRule::TwoP => "2p",
        }
    }

    /// Whether `ν_p / p² → 0`.
    pub fn is_light_tail(self) -> bool {
        self != NuRule::PSquared
    }
}

impl std::str::FromStr for NuRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(NuRule::Zero),
            "sqrt_p" => Ok(NuRule::SqrtP),
            "p" => Ok(NuRule::P),
            "p2" => Ok(NuRule::PSquared),
            "2p" => Ok(NuRule::TwoP),
            _ => Err(Error::InvalidInput(format!("unknown nu rule `{s}`"))),
        }
    }
}

/// Law of `ρ²` with `E ρ² = p` and `Var ρ² = ν_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusLaw {
    pub kind: RadiusKind,
    pub p: usize,
    pub nu_p: f64,
}

impl RadiusLaw {
    /// Validates and builds a law.
    pub fn new(kind: RadiusKind, p: usize, nu_p: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("p must be positive".into()));
        }
        if !(nu_p.is_finite() && nu_p >= 0.0) {
            return Err(Error::InvalidInput(format!("nu_p must be >= 0, got {nu_p}")));
        }
        let pf = p as f64;
        match kind {
            RadiusKind::Deterministic if nu_p != 0.0 => {
                return Err(Error::InvalidInput(
                    "deterministic radius requires nu_p = 0".into(),
                ))
            }
            RadiusKind::TwoPoint if nu_p.sqrt() > pf => {
                return Err(Error::InvalidInput(format!(
                    "two-point law needs sqrt(nu_p) <= p, got sqrt({nu_p}) > {p}"
                )))
            }
            RadiusKind::ChiSquare if (nu_p - 2.0 * pf).abs() > 1e-9 * pf => {
                return Err(Error::InvalidInput(format!(
                    "chi-square radius forces nu_p = 2p = {}, got {nu_p}",
                    2.0 * pf
                )))
            }
            RadiusKind::Gamma if nu_p == 0.0 => {
                return Err(Error::InvalidInput("gamma radius requires nu_p > 0".into()))
            }
            _ => {}
        }
        Ok(Self { kind, p, nu_p })
    }

    /// Law following a growth rule at dimension `p`.
    pub fn from_rule(kind: RadiusKind, p: usize, rule: NuRule) -> Result<Self> {
        let nu = match kind {
            RadiusKind::ChiSquare => 2.0 * p as f64,
            RadiusKind::Deterministic => 0.0,
            _ => rule.eval(p),
        };
        Self::new(kind, p, nu)
    }

    /// Second moment of `ρ²`, `m_p = ν_p + p²`.
    pub fn m_p(&self) -> f64 {
        self.nu_p + (self.p as f64).powi(2)
    }

    /// Scale `√(p²/m_p)` applied to the sample covariance matrix.
    pub fn normalization(&self) -> f64 {
        ((self.p as f64).powi(2) / self.m_p()).sqrt()
    }

    /// Analytic `E ρ²`.
    pub fn mean_sq(&self) -> f64 {
        self.p as f64
    }

    /// Analytic `Var ρ²`.
    pub fn var_sq(&self) -> f64 {
        self.nu_p
    }

    /// False for laws whose normalized radius has unbounded limiting support.
    pub fn is_conforming(&self) -> bool {
        self.kind != RadiusKind::Gamma
    }

    /// Draws one `ρ²`.
    pub fn sample_rho_sq<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.p as f64;
        match self.kind {
            RadiusKind::Deterministic => p,
            RadiusKind::TwoPoint => {
                let s = self.nu_p.sqrt();
                if rng.gen::<bool>() {
                    p + s
                } else {
                    p - s
                }
            }
            RadiusKind::ChiSquare => ChiSquared::new(p).expect("p > 0").sample(rng),
            RadiusKind::Gamma => GammaDist::new(p * p / self.nu_p, self.nu_p / p)
                .expect("validated parameters")
                .sample(rng),
        }
    }
}

/// Law of `ρ²/√m_p` as a discrete measure.
///
/// Exact for deterministic and two-point laws. Continuous laws are discretized
/// on [`QUANTILE_ATOMS`] quantile midpoints, then mapped affinely so that the
/// first two moments are exact.
pub fn radius_law_to_h2(law: &RadiusLaw) -> Result<DiscreteMeasure> {
    let law = RadiusLaw::new(law.kind, law.p, law.nu_p)?;
    let p = law.p as f64;
    let root_m = law.m_p().sqrt();
    match law.kind {
        RadiusKind::Deterministic => Ok(DiscreteMeasure::dirac(p / root_m)),
        RadiusKind::TwoPoint => {
            let s = law.nu_p.sqrt();
            DiscreteMeasure::new(vec![(p - s) / root_m, (p + s) / root_m], vec![0.5, 0.5])
        }
        RadiusKind::ChiSquare | RadiusKind::Gamma => {
            let (shape, rate) = match law.kind {
                RadiusKind::ChiSquare => (p / 2.0, 0.5),
                _ => (p * p / law.nu_p, p / law.nu_p),
            };
            let dist = Gamma::new(shape, rate)
                .map_err(|e| Error::InvalidInput(format!("gamma parameters: {e}")))?;
            let k = QUANTILE_ATOMS;
            let mut y: Vec<f64> = (0..k)
                .map(|i| dist.inverse_cdf((i as f64 + 0.5) / k as f64) / root_m)
                .collect();
            let mean = y.iter().sum::<f64>() / k as f64;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
            let target_mean = p / root_m;
            let target_var = law.nu_p / law.m_p();
            let b = (target_var / var).sqrt();
            let a = target_mean - b * mean;
            if y.iter().all(|&v| a + b * v >= 0.0) {
                y.iter_mut().for_each(|v| *v = a + b * *v);
            } else {
                // Scale the body and move the top atom: (1/k)(sA + L) = μ and
                // (1/k)(s²B + L²) = 1, a quadratic in s.
                let kf = k as f64;
                let body = &y[..k - 1];
                let sa: f64 = body.iter().sum();
                let sb: f64 = body.iter().map(|v| v * v).sum();
                let qa = sb + sa * sa;
                let qb = -2.0 * kf * target_mean * sa;
                let qc = kf * kf * target_mean * target_mean - kf;
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                let s = [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)]
                    .into_iter()
                    .filter(|&s| s > 0.0 && kf * target_mean - s * sa >= s * body[k - 2])
                    .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
                    .ok_or_else(|| Error::Internal("moment matching failed".into()))?;
                y.iter_mut().take(k - 1).for_each(|v| *v *= s);
                y[k - 1] = kf * target_mean - s * sa;
            }
            DiscreteMeasure::uniform(&y)
        }
    }
}
