//! Normalized sample covariance matrices and their spectral statistics.
//!
//! `S = √(p²/m_p)/n · Γ X Xᵀ Γᵀ`. Every resolvent functional is computed from
//! one eigendecomposition so that many spectral arguments cost one pass each.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_unit, sym_eigen, sym_eigenvalues, symmetrize};
use crate::sampler::EllipticalSample;

/// Normalized SCM with its sorted spectrum.
#[derive(Debug, Clone)]
pub struct ScmBundle {
    pub s: DMatrix<f64>,
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// `√(p²/m_p)`.
    pub normalization: f64,
    pub n: usize,
}

/// `√(p²/m_p)/n · Γ X Xᵀ Γ`, symmetrized.
pub fn normalized_scm(sample: &EllipticalSample) -> DMatrix<f64> {
    let gx = &sample.population.gamma * &sample.data;
    let scale = sample.law.normalization() / sample.data.ncols() as f64;
    symmetrize(&gx * gx.transpose() * scale)
}

/// Builds the SCM and its eigendecomposition.
pub fn build_scm(sample: &EllipticalSample) -> Result<ScmBundle> {
    let s = normalized_scm(sample);
    let spec = sym_eigen(s.clone())?;
    Ok(ScmBundle {
        s,
        eigenvalues: spec.values,
        eigenvectors: spec.vectors,
        normalization: sample.law.normalization(),
        n: sample.data.ncols(),
    })
}

/// Eigenvalues of the companion `√(p²/m_p)/n · Xᵀ Γᵀ Γ X`, ascending.
pub fn companion_eigenvalues(sample: &EllipticalSample) -> Vec<f64> {
    let gx = &sample.population.gamma * &sample.data;
    let scale = sample.law.normalization() / sample.data.ncols() as f64;
    sym_eigenvalues(&symmetrize(gx.transpose() * &gx * scale))
}

/// Cached projections of two vectors on the sample eigenbasis.
#[derive(Debug, Clone)]
pub struct ResolventProbe<'a> {
    eigenvalues: &'a [f64],
    weights: Vec<f64>,
}

impl<'a> ResolventProbe<'a> {
    /// `πᵀ(S − z)^{-1}π'` for one `z`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_pole(self.eigenvalues, z)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w / (l - z))
            .sum())
    }
}

fn check_pole(eigenvalues: &[f64], z: Complex64) -> Result<()> {
    if z.im == 0.0 {
        let (lo, hi) = (eigenvalues[0], *eigenvalues.last().unwrap());
        if z.re >= lo && z.re <= hi {
            return Err(Error::Pole {
                z,
                detail: format!("real argument inside the spectrum [{lo}, {hi}]"),
            });
        }
    }
    Ok(())
}

impl ScmBundle {
    /// Dimension.
    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Prepares repeated evaluation of `π1ᵀ(S − z)^{-1}π2`.
    pub fn probe(&self, pi1: &DVector<f64>, pi2: &DVector<f64>) -> Result<ResolventProbe<'_>> {
        check_unit(pi1, "pi1")?;
        check_unit(pi2, "pi2")?;
        let q1 = self.eigenvectors.tr_mul(pi1);
        let q2 = self.eigenvectors.tr_mul(pi2);
        Ok(ResolventProbe {
            eigenvalues: &self.eigenvalues,
            weights: q1.component_mul(&q2).iter().copied().collect(),
        })
    }

    /// Stieltjes transform of the ESD, `(1/p) Σ 1/(λ_j − z)`.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        check_pole(&self.eigenvalues, z)?;
        let p = self.p() as f64;
        Ok(self.eigenvalues.iter().map(|&l| 1.0 / (l - z)).sum::<Complex64>() / p)
    }

    /// Squared projections `|v_jᵀπ|²` in eigenvalue order.
    pub fn vesd_weights(&self, pi: &DVector<f64>) -> Result<Vec<f64>> {
        check_unit(pi, "pi")?;
        Ok(self.eigenvectors.tr_mul(pi).iter().map(|q| q * q).collect())
    }
}

/// `π1ᵀ(S − z)^{-1}π2` from the eigendecomposition.
pub fn bilinear_resolvent(bundle: &ScmBundle, pi1: &DVector<f64>, pi2: &DVector<f64>, z: Complex64) -> Result<Complex64> {
    bundle.probe(pi1, pi2)?.eval(z)
}

/// Empirical and vector empirical spectral distributions on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vesd {
    pub grid: Vec<f64>,
    pub esd: Vec<f64>,
    pub vesd: Vec<f64>,
    pub pi: Vec<f64>,
}

impl Vesd {
    /// Writes `x,esd,vesd` CSV.
    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["x", "esd", "vesd"])?;
        for i in 0..self.grid.len() {
            wtr.write_record([
                format!("{:e}", self.grid[i]),
                format!("{:e}", self.esd[i]),
                format!("{:e}", self.vesd[i]),
            ])?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    /// `sup_x |F_v(x) − F(x)|` over the grid.
    pub fn sup_discrepancy(&self) -> f64 {
        self.esd
            .iter()
            .zip(&self.vesd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// ESD and VESD of `π` evaluated on an ascending grid.
pub fn vesd(bundle: &ScmBundle, pi: &DVector<f64>, grid: &[f64]) -> Result<Vesd> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("grid must be strictly ascending".into()));
    }
    let weights = bundle.vesd_weights(pi)?;
    let p = bundle.p() as f64;
    let ev = &bundle.eigenvalues;
    let mut esd = Vec::with_capacity(grid.len());
    let mut out = Vec::with_capacity(grid.len());
    let (mut j, mut count, mut mass) = (0usize, 0.0, 0.0);
    for &x in grid {
        while j < ev.len() && ev[j] <= x {
            count += 1.0;
            mass += weights[j];
            j += 1;
        }
        esd.push(count / p);
        out.push(mass);
    }
    Ok(Vesd {
        grid: grid.to_vec(),
        esd,
        vesd: out,
        pi: pi.iter().copied().collect(),
    })
}

/// Scaled data `Y = (p²/m_p)^{1/4} X / √n`.
fn scaled_data(sample: &EllipticalSample) -> DMatrix<f64> {
    let n = sample.data.ncols() as f64;
    &sample.data * (sample.law.normalization().sqrt() / n.sqrt())
}

/// Shared pieces of the spike equations: `Yᵀ U1` and `Yᵀ Σ1p Y`.
#[derive(Debug, Clone)]
pub struct SpikeBlocks {
    pub yt_u1: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub spikes: Vec<f64>,
}

impl SpikeBlocks {
    /// Precomputes the blocks for one sample.
    pub fn new(sample: &EllipticalSample) -> Result<Self> {
        let pop = &sample.population;
        if pop.k() == 0 {
            return Err(Error::InvalidInput("population has no spikes".into()));
        }
        let y = scaled_data(sample);
        let gy = pop.gamma_nonspiked() * &y;
        Ok(Self {
            yt_u1: y.tr_mul(&pop.spike_vectors()),
            b: symmetrize(gy.tr_mul(&gy)),
            spikes: pop.spec.spikes.clone(),
        })
    }

    /// `U1ᵀ Y (λ I − Yᵀ Σ1p Y)^{-1} Yᵀ U1` at real `λ`.
    pub fn resolvent_block(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let n = self.b.nrows();
        let m = DMatrix::identity(n, n) * lambda - &self.b;
        let lu = m.lu();
        let rhs = lu.solve(&self.yt_u1).ok_or_else(|| Error::Pole {
            z: lambda.into(),
            detail: "λI − YᵀΣ1pY is singular".into(),
        })?;
        let out = self.yt_u1.tr_mul(&rhs);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Pole {
                z: lambda.into(),
                detail: "λI − YᵀΣ1pY is numerically singular".into(),
            });
        }
        Ok(out)
    }
}

/// `|det(Λ_S^{-1} − U1ᵀY(λI − YᵀΣ1pY)^{-1}YᵀU1)|`.
pub fn spike_determinant_residual(sample: &EllipticalSample, lambda: f64) -> Result<f64> {
    let blocks = SpikeBlocks::new(sample)?;
    let q = blocks.resolvent_block(lambda)?;
    let inv = DMatrix::from_diagonal(&DVector::from_iterator(
        blocks.spikes.len(),
        blocks.spikes.iter().map(|a| 1.0 / a),
    ));
    Ok((inv - q).determinant().abs())
}

/// `√p z (U1ᵀY(zI − YᵀΣ1pY)^{-1}YᵀU1 + g2 I)` at real `z`.
pub fn goe_matrix(blocks: &SpikeBlocks, p: usize, z: f64, g2: f64) -> Result<DMatrix<f64>> {
    let q = blocks.resolvent_block(z)?;
    let k = q.nrows();
    Ok((q + DMatrix::identity(k, k) * g2) * ((p as f64).sqrt() * z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{RadiusKind, RadiusLaw};
    use crate::sampler::{build_population, draw_sample, BulkRule, PopulationSpec};
    use std::sync::Arc;

    fn e(p: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(p, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    fn identity_sample(p: usize, n: usize, seed: u64) -> EllipticalSample {
        let pop = Arc::new(build_population(&PopulationSpec::identity(p)).unwrap());
        let law = RadiusLaw::new(RadiusKind::Deterministic, p, 0.0).unwrap();
        draw_sample(&pop, &law, n, seed).unwrap()
    }

    fn spiked_sample(p: usize, n: usize, seed: u64) -> EllipticalSample {
        let spec = PopulationSpec {
            p,
            spikes: vec![8.0],
            bulk: BulkRule::Uniform { seed: Some(4) },
            toeplitz_rho: 0.9,
            separation: 0.1,
        };
        let pop = Arc::new(build_population(&spec).unwrap());
        let law = RadiusLaw::new(RadiusKind::TwoPoint, p, p as f64).unwrap();
        draw_sample(&pop, &law, n, seed).unwrap()
    }

    #[test]
    fn square_case_edge() {
        let b = build_scm(&identity_sample(400, 400, 1)).unwrap();
        assert!(*b.eigenvalues.last().unwrap() < 4.5);
    }

    #[test]
    fn rank_one_scm() {
        let b = build_scm(&identity_sample(20, 1, 2)).unwrap();
        let zeros = b.eigenvalues.iter().filter(|l| l.abs() < 1e-10).count();
        assert_eq!(zeros, 19);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let b = build_scm(&spiked_sample(50, 100, 3)).unwrap();
        let v = &b.eigenvectors;
        let d = DMatrix::from_diagonal(&DVector::from_vec(b.eigenvalues.clone()));
        let back = v * d * v.transpose();
        assert!((back - &b.s).norm() / b.s.norm() < 1e-9);
        assert!(crate::linalg::orthogonality_residual(v) < 1e-9);
    }

    #[test]
    fn zero_matrix_resolvent() {
        let b = ScmBundle {
            s: DMatrix::zeros(3, 3),
            eigenvalues: vec![0.0; 3],
            eigenvectors: DMatrix::identity(3, 3),
            normalization: 1.0,
            n: 1,
        };
        let pi = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let r = bilinear_resolvent(&b, &pi, &pi, Complex64::new(0.0, 1.0)).unwrap();
        assert!((r - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn eigenvector_resolvent() {
        let b = build_scm(&identity_sample(30, 60, 4)).unwrap();
        let v = b.eigenvectors.column(0).into_owned();
        let z = Complex64::new(0.7, 0.3);
        let r = bilinear_resolvent(&b, &v, &v, z).unwrap();
        assert!((r - 1.0 / (b.eigenvalues[0] - z)).norm() < 1e-10);
        assert!(r.im > 0.0);
        let inside = Complex64::new(b.eigenvalues[3], 0.0);
        assert!(matches!(bilinear_resolvent(&b, &v, &v, inside), Err(Error::Pole { .. })));
    }

    #[test]
    fn resolvent_close_to_marchenko_pastur() {
        let b = build_scm(&identity_sample(400, 400, 5)).unwrap();
        let z = Complex64::new(1.0, 1.0);
        let r = bilinear_resolvent(&b, &e(400, 0), &e(400, 0), z).unwrap();
        let m = crate::lsd::marchenko_pastur_m(1.0, z);
        assert!((r - m).norm() < 0.05, "{r} vs {m}");
    }

    #[test]
    fn trace_identity() {
        let b = build_scm(&spiked_sample(20, 40, 6)).unwrap();
        for z in [Complex64::new(0.5, 0.2), Complex64::new(3.0, 1.0)] {
            let tr: Complex64 = (0..20)
                .map(|i| bilinear_resolvent(&b, &e(20, i), &e(20, i), z).unwrap())
                .sum::<Complex64>()
                / 20.0;
            assert!((tr - b.stieltjes(z).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn companion_shares_nonzero_eigenvalues() {
        let s = spiked_sample(30, 12, 7);
        let b = build_scm(&s).unwrap();
        let comp = companion_eigenvalues(&s);
        let top_s = &b.eigenvalues[30 - 12..];
        for (a, c) in top_s.iter().zip(&comp) {
            assert!((a - c).abs() < 1e-8);
        }
    }

    #[test]
    fn vesd_properties() {
        let b = build_scm(&identity_sample(200, 400, 8)).unwrap();
        let grid: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
        let v = vesd(&b, &e(200, 0), &grid).unwrap();
        assert!((v.vesd.last().unwrap() - 1.0).abs() < 1e-12);
        assert!((v.esd.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(v.vesd.windows(2).all(|w| w[0] <= w[1]));
        assert!(v.sup_discrepancy() < 0.15);
        let w = b.vesd_weights(&e(200, 0)).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        // Eigenvector as π: one jump at its eigenvalue.
        let vk = b.eigenvectors.column(100).into_owned();
        let jump = vesd(&b, &vk, &[b.eigenvalues[100] - 1e-9, b.eigenvalues[100]]).unwrap();
        assert!(jump.vesd[0].abs() < 1e-10 && (jump.vesd[1] - 1.0).abs() < 1e-10);
        // Averaging over the coordinate basis recovers the ESD.
        let mut avg = vec![0.0; grid.len()];
        for i in 0..200 {
            let vi = vesd(&b, &e(200, i), &grid).unwrap();
            avg.iter_mut().zip(&vi.vesd).for_each(|(a, x)| *a += x / 200.0);
        }
        assert!(avg.iter().zip(&v.esd).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn determinant_residual() {
        let s = spiked_sample(50, 100, 9);
        let b = build_scm(&s).unwrap();
        let top = *b.eigenvalues.last().unwrap();
        assert!(spike_determinant_residual(&s, top).unwrap() < 1e-6);
        let far = spike_determinant_residual(&s, 1e6).unwrap();
        assert!((far - 0.125).abs() < 1e-5);
        let none = identity_sample(10, 10, 1);
        assert!(spike_determinant_residual(&none, 5.0).is_err());
    }
}
