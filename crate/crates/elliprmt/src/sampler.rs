//! Spiked elliptical populations and samples `x_j = ρ_j Γ u_j`.
//!
//! The population covariance is `Σ = U0 D0 U0ᵀ` where `U0` is the eigenbasis
//! of the Toeplitz matrix `(r^{|i-j|})` and `D0` lists the spikes followed by
//! the bulk eigenvalues. Directions are drawn by normalizing standard Gaussian
//! vectors, which is exactly uniform on the sphere.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthogonality_residual, spectral_function, sym_eigen, Spectrum};
use crate::measure::{DiscreteMeasure, RadiusLaw};

/// Condition number above which a population triggers a warning.
pub const COND_WARN: f64 = 1e8;

/// Rule for the `p - K` non-spiked population eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BulkRule {
    /// Independent `U(0,1)` draws from a dedicated stream of `seed`.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Every bulk eigenvalue equals `value`.
    Constant { value: f64 },
    /// Explicit list of length `p - K`.
    Explicit { values: Vec<f64> },
}

fn default_rho() -> f64 {
    0.9
}

fn default_separation() -> f64 {
    0.1
}

/// Description of a spiked population covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub p: usize,
    #[serde(default)]
    pub spikes: Vec<f64>,
    pub bulk: BulkRule,
    #[serde(default = "default_rho")]
    pub toeplitz_rho: f64,
    /// Separation constant `d` for spike checks.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

impl PopulationSpec {
    /// Identity covariance of dimension `p`.
    pub fn identity(p: usize) -> Self {
        Self {
            p,
            spikes: Vec::new(),
            bulk: BulkRule::Constant { value: 1.0 },
            toeplitz_rho: 0.0,
            separation: default_separation(),
        }
    }

    /// Fills an unset uniform-bulk seed.
    pub fn with_bulk_seed(mut self, seed: u64) -> Self {
        if let BulkRule::Uniform { seed: s @ None } = &mut self.bulk {
            *s = Some(seed);
        }
        self
    }

    /// Same specification at another dimension.
    pub fn at_dimension(&self, p: usize) -> Self {
        Self { p, ..self.clone() }
    }

    fn bulk_values(&self) -> Result<Vec<f64>> {
        let k = self.spikes.len();
        if k > self.p {
            return Err(Error::InvalidInput(format!("{k} spikes exceed dimension {}", self.p)));
        }
        let m = self.p - k;
        match &self.bulk {
            BulkRule::Uniform { seed } => {
                let seed = seed.ok_or_else(|| {
                    Error::InvalidInput("uniform bulk needs a seed before the population is built".into())
                })?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..m).map(|_| rng.gen::<f64>()).collect())
            }
            BulkRule::Constant { value } => Ok(vec![*value; m]),
            BulkRule::Explicit { values } => {
                if values.len() != m {
                    return Err(Error::InvalidInput(format!(
                        "explicit bulk has {} values, expected p - K = {m}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Materialized population: `Σ`, its eigenbasis and the symmetric root `Γ`.
#[derive(Debug, Clone)]
pub struct Population {
    pub spec: PopulationSpec,
    pub sigma: DMatrix<f64>,
    /// Columns pair with `d0`: spikes first, then the bulk.
    pub u0: DMatrix<f64>,
    pub d0: Vec<f64>,
    /// `Σ^{1/2}` in the eigenbasis of `Σ`.
    pub gamma: DMatrix<f64>,
    pub warnings: Vec<String>,
}

/// Eigenbasis of the Toeplitz matrix `(ρ^{|i-j|})`, columns by descending eigenvalue.
///
/// Each column is signed so its largest-magnitude entry is positive.
pub fn toeplitz_basis(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!("toeplitz_rho must lie in (-1, 1), got {rho}")));
    }
    if rho == 0.0 {
        return Ok(DMatrix::identity(p, p));
    }
    let a = DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()));
    let s = sym_eigen(a)?;
    let mut u = DMatrix::zeros(p, p);
    for c in 0..p {
        let src = s.vectors.column(p - 1 - c);
        let mut pivot = 0;
        for r in 0..p {
            if src[r].abs() > src[pivot].abs() + 1e-12 {
                pivot = r;
            }
        }
        let sign = if src[pivot] < 0.0 { -1.0 } else { 1.0 };
        u.set_column(c, &(src * sign));
    }
    let res = orthogonality_residual(&u);
    if res > 1e-10 * p as f64 {
        return Err(Error::Internal(format!("Toeplitz eigenbasis not orthogonal, residual {res:.3e}")));
    }
    Ok(u)
}

/// Builds `Σ = U0 D0 U0ᵀ` and validates the spike layout.
pub fn build_population(spec: &PopulationSpec) -> Result<Population> {
    if spec.p == 0 {
        return Err(Error::InvalidInput("p must be positive".into()));
    }
    if !(spec.separation > 0.0) {
        return Err(Error::InvalidInput("separation must be positive".into()));
    }
    let bulk = spec.bulk_values()?;
    if bulk.iter().any(|&b| !(b.is_finite() && b >= 0.0)) {
        return Err(Error::InvalidInput("bulk eigenvalues must be finite and nonnegative".into()));
    }
    let spikes = &spec.spikes;
    if spikes.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidInput("spikes must be strictly descending".into()));
    }
    let bulk_top = bulk.iter().copied().fold(0.0f64, f64::max);
    if let Some(&last) = spikes.last() {
        if !(last > bulk_top * (1.0 + spec.separation)) {
            return Err(Error::InvalidInput(format!(
                "spike {last} does not exceed the bulk edge {bulk_top} by the factor 1 + {}",
                spec.separation
            )));
        }
    }
    let mut warnings = Vec::new();
    for w in spikes.windows(2) {
        if (w[0] / w[1] - 1.0).abs() <= spec.separation {
            warnings.push(format!(
                "spikes {} and {} violate the separation condition with d = {}",
                w[0], w[1], spec.separation
            ));
        }
    }
    let d0: Vec<f64> = spikes.iter().copied().chain(bulk).collect();
    let lo = d0.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d0.iter().copied().fold(0.0f64, f64::max);
    let cond = hi / lo;
    if !(cond <= COND_WARN) {
        warnings.push(format!("population condition number {cond:.3e} exceeds {COND_WARN:e}"));
    }
    let u0 = toeplitz_basis(spec.p, spec.toeplitz_rho)?;
    let spectrum = Spectrum {
        values: d0.clone(),
        vectors: u0.clone(),
    };
    let sigma = spectral_function(&spectrum, |x| x);
    let gamma = spectral_function(&spectrum, f64::sqrt);
    Ok(Population {
        spec: spec.clone(),
        sigma,
        u0,
        d0,
        gamma,
        warnings,
    })
}

impl Population {
    /// Dimension.
    pub fn p(&self) -> usize {
        self.spec.p
    }

    /// Number of spikes.
    pub fn k(&self) -> usize {
        self.spec.spikes.len()
    }

    /// `Σ` as a spectrum, eigenvalues in `d0` order.
    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            values: self.d0.clone(),
            vectors: self.u0.clone(),
        }
    }

    /// Eigenvector paired with `d0[i]`.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.u0.column(i).into_owned()
    }

    /// `U1`, the spiked eigenvectors.
    pub fn spike_vectors(&self) -> DMatrix<f64> {
        self.u0.columns(0, self.k()).into_owned()
    }

    /// Eigenvalues of `Σ1p`: spikes replaced by zero.
    pub fn nonspiked_values(&self) -> Vec<f64> {
        let k = self.k();
        self.d0
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < k { 0.0 } else { v })
            .collect()
    }

    /// `Σ1p^{1/2}`, same eigenbasis with spikes zeroed.
    pub fn gamma_nonspiked(&self) -> DMatrix<f64> {
        let s = Spectrum {
            values: self.nonspiked_values(),
            vectors: self.u0.clone(),
        };
        spectral_function(&s, f64::sqrt)
    }

    /// ESD of `Σ`.
    pub fn h1(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::uniform(&self.d0)
    }

    /// ESD of `Σ1p`.
    pub fn h1_nonspiked(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::uniform(&self.nonspiked_values())
    }
}

/// One simulated `p × n` data matrix.
#[derive(Debug, Clone)]
pub struct EllipticalSample {
    pub data: DMatrix<f64>,
    pub radii: Vec<f64>,
    pub seed: u64,
    pub law: RadiusLaw,
    pub population: Arc<Population>,
}

/// Generator for replicate `index` of an experiment with master seed `seed`.
///
/// Stream 0 is left to population-level draws; replicates use disjoint
/// ChaCha streams `index + 1`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

/// Draws `n` columns `ρ_j y_j/‖y_j‖` from a generator.
pub fn draw_sample_with<R: Rng + ?Sized>(
    population: &Arc<Population>,
    law: &RadiusLaw,
    n: usize,
    seed: u64,
    rng: &mut R,
) -> Result<EllipticalSample> {
    let p = population.p();
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if law.p != p {
        return Err(Error::InvalidInput(format!("radius law is for p = {}, population has p = {p}", law.p)));
    }
    let mut data = DMatrix::zeros(p, n);
    let mut radii = Vec::with_capacity(n);
    for j in 0..n {
        let mut col = data.column_mut(j);
        let mut norm_sq = 0.0;
        for r in 0..p {
            let v: f64 = rng.sample(StandardNormal);
            col[r] = v;
            norm_sq += v * v;
        }
        let rho = law.sample_rho_sq(rng).max(0.0).sqrt();
        col.scale_mut(rho / norm_sq.sqrt());
        radii.push(rho);
    }
    Ok(EllipticalSample {
        data,
        radii,
        seed,
        law: *law,
        population: Arc::clone(population),
    })
}

/// Draws a sample reproducibly from `seed`.
pub fn draw_sample(population: &Arc<Population>, law: &RadiusLaw, n: usize, seed: u64) -> Result<EllipticalSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_sample_with(population, law, n, seed, &mut rng)
}

/// Writes the data matrix as headerless CSV, one row per coordinate.
pub fn write_sample_csv<W: std::io::Write>(sample: &EllipticalSample, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in 0..sample.data.nrows() {
        wtr.write_record(sample.data.row(r).iter().map(|v| format!("{v:e}")))?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Uniform direction on `S^{p-1}`.
pub fn sphere_direction<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    v /= n;
    v
}

/// Exact `Cov(uᵀAu, uᵀBu)` for `u` uniform on the sphere:
/// `[tr(ABᵀ) + tr(AB)]/(p(p+2)) − 2 tr(A) tr(B)/(p²(p+2))`.
pub fn quadform_moment_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let p = a.nrows();
    if a.ncols() != p || b.nrows() != p || b.ncols() != p {
        return Err(Error::InvalidInput(format!(
            "expected two square matrices of the same size, got {}×{} and {}×{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let pf = p as f64;
    let tr_abt = a.component_mul(b).sum();
    let tr_ab = a.component_mul(&b.transpose()).sum();
    Ok((tr_abt + tr_ab) / (pf * (pf + 2.0)) - 2.0 * a.trace() * b.trace() / (pf * pf * (pf + 2.0)))
}

/// Monte Carlo estimate of `Cov(uᵀAu, uᵀBu)` centred at the exact means
/// `tr(A)/p` and `tr(B)/p`, with its standard error.
pub fn quadform_monte_carlo<R: Rng + ?Sized>(a: &DMatrix<f64>, b: &DMatrix<f64>, draws: usize, rng: &mut R) -> (f64, f64) {
    let p = a.nrows();
    let (ma, mb) = (a.trace() / p as f64, b.trace() / p as f64);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut u = DVector::zeros(p);
    for _ in 0..draws {
        let mut ns = 0.0;
        for i in 0..p {
            let v: f64 = rng.sample(StandardNormal);
            u[i] = v;
            ns += v * v;
        }
        u /= ns.sqrt();
        let qa = u.dot(&(a * &u)) - ma;
        let qb = u.dot(&(b * &u)) - mb;
        let prod = qa * qb;
        sum += prod;
        sum_sq += prod * prod;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RadiusKind;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn spiked(p: usize) -> PopulationSpec {
        PopulationSpec {
            p,
            spikes: vec![8.0],
            bulk: BulkRule::Uniform { seed: Some(11) },
            toeplitz_rho: 0.9,
            separation: 0.1,
        }
    }

    #[test]
    fn spiked_population_top_eigenvalue() {
        let pop = build_population(&spiked(50)).unwrap();
        let ev = crate::linalg::sym_eigenvalues(&pop.sigma);
        assert!((ev[49] - 8.0).abs() < 1e-10);
        assert!((&pop.sigma - pop.sigma.transpose()).norm() < 1e-10);
        let g2 = &pop.gamma * &pop.gamma;
        assert!((g2 - &pop.sigma).norm() < 1e-10);
    }

    #[test]
    fn identity_population() {
        let spec = PopulationSpec {
            p: 3,
            spikes: vec![],
            bulk: BulkRule::Explicit { values: vec![1.0; 3] },
            toeplitz_rho: 0.5,
            separation: 0.1,
        };
        let pop = build_population(&spec).unwrap();
        assert!((pop.sigma - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn zero_rho_gives_identity_basis() {
        let u = toeplitz_basis(4, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(u[(i, j)].abs(), expect);
            }
        }
    }

    #[test]
    fn rejects_bad_spikes() {
        let mut s = spiked(10);
        s.spikes = vec![1.05];
        assert!(build_population(&s).is_err());
        s.spikes = vec![3.0, 5.0];
        assert!(build_population(&s).is_err());
        s.spikes = vec![5.0, 4.8];
        let pop = build_population(&s).unwrap();
        assert_eq!(pop.warnings.len(), 1);
    }

    #[test]
    fn warns_on_ill_conditioning() {
        let spec = PopulationSpec {
            p: 3,
            spikes: vec![],
            bulk: BulkRule::Explicit { values: vec![1.0, 1e-9, 0.5] },
            toeplitz_rho: 0.0,
            separation: 0.1,
        };
        let pop = build_population(&spec).unwrap();
        assert!(pop.warnings.iter().any(|w| w.contains("condition")));
    }

    #[test]
    fn deterministic_radius_single_column() {
        let pop = Arc::new(build_population(&PopulationSpec::identity(7)).unwrap());
        let law = RadiusLaw::new(RadiusKind::Deterministic, 7, 0.0).unwrap();
        let s = draw_sample(&pop, &law, 1, 5).unwrap();
        assert!((s.data.column(0).norm() - 7f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sample_norms_and_reproducibility() {
        let pop = Arc::new(build_population(&spiked(50)).unwrap());
        let law = RadiusLaw::new(RadiusKind::TwoPoint, 50, 50.0).unwrap();
        let a = draw_sample(&pop, &law, 100, 9).unwrap();
        let b = draw_sample(&pop, &law, 100, 9).unwrap();
        assert_eq!(a.data, b.data);
        for j in 0..100 {
            assert!((a.data.column(j).norm() - a.radii[j]).abs() < 1e-10);
        }
        let mean_sq = a.radii.iter().map(|r| r * r).sum::<f64>() / 100.0;
        assert!((mean_sq - 50.0).abs() < 3.0 * (50.0f64 / 100.0).sqrt());
    }

    #[test]
    fn replicate_streams_differ() {
        let mut a = replicate_rng(1, 0);
        let mut b = replicate_rng(1, 1);
        assert_ne!(a.gen::<u64>(), b.gen::<u64>());
        let mut c = replicate_rng(1, 0);
        let mut a2 = replicate_rng(1, 0);
        assert_eq!(c.gen::<u64>(), a2.gen::<u64>());
    }

    #[test]
    fn quadform_oracle_examples() {
        let i5 = DMatrix::<f64>::identity(5, 5);
        assert!(quadform_moment_oracle(&i5, &i5).unwrap().abs() < 1e-15);
        let mut e = DMatrix::zeros(2, 2);
        e[(0, 0)] = 1.0;
        assert!((quadform_moment_oracle(&e, &e).unwrap() - 0.125).abs() < 1e-15);
        for p in [3usize, 10, 40] {
            let mut e = DMatrix::zeros(p, p);
            e[(0, 0)] = 1.0;
            let pf = p as f64;
            let expect = 2.0 * (pf - 1.0) / (pf * pf * (pf + 2.0));
            assert!((quadform_moment_oracle(&e, &e).unwrap() - expect).abs() < 1e-15);
        }
        assert!(quadform_moment_oracle(&i5, &DMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn quadform_monte_carlo_rank_one() {
        let p = 6;
        let mut e = DMatrix::zeros(p, p);
        e[(0, 0)] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (est, se) = quadform_monte_carlo(&e, &e, 200_000, &mut rng);
        let exact = quadform_moment_oracle(&e, &e).unwrap();
        assert!((est - exact).abs() < 5.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn directions_are_centred() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 20_000;
        let mut acc = DVector::zeros(5);
        for _ in 0..n {
            acc += sphere_direction(5, &mut rng);
        }
        acc /= n as f64;
        // Each coordinate has variance 1/p.
        let se = (1.0 / 5.0 / n as f64).sqrt();
        assert!(acc.iter().all(|v| v.abs() < 5.0 * se));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn columns_have_radius_norm(seed in any::<u64>(), p in 2usize..20, n in 1usize..20) {
            let pop = Arc::new(build_population(&PopulationSpec::identity(p)).unwrap());
            let law = RadiusLaw::new(RadiusKind::Gamma, p, p as f64).unwrap();
            let s = draw_sample(&pop, &law, n, seed).unwrap();
            for j in 0..n {
                prop_assert!((s.data.column(j).norm() - s.radii[j]).abs() < 1e-10);
            }
        }

        #[test]
        fn oracle_is_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(4, 4, |_, _| rng.gen::<f64>() - 0.5);
            let b = DMatrix::from_fn(4, 4, |_, _| rng.gen::<f64>() - 0.5);
            let ab = quadform_moment_oracle(&a, &b).unwrap();
            let ba = quadform_moment_oracle(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-14);
        }
    }
}
