//! Dense symmetric eigendecompositions and spectral projections.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues in ascending order with matching orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition sorted ascending.
pub fn sym_eigen(m: DMatrix<f64>) -> Result<Spectrum> {
    let p = m.nrows();
    if p != m.ncols() {
        return Err(Error::InvalidInput(format!("matrix is {}×{}, not square", p, m.ncols())));
    }
    let max_sweeps = 1000 * p.max(1);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, max_sweeps).ok_or_else(|| {
        Error::Internal(format!("symmetric eigensolver did not converge in {max_sweeps} iterations"))
    })?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `V diag(f(λ)) Vᵀ`.
pub fn spectral_function(s: &Spectrum, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = s.vectors.clone();
    for (j, &l) in s.values.iter().enumerate() {
        let w = f(l);
        scaled.column_mut(j).scale_mut(w);
    }
    let out = &scaled * s.vectors.transpose();
    symmetrize(out)
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `‖VᵀV − I‖_F`.
pub fn orthogonality_residual(v: &DMatrix<f64>) -> f64 {
    let n = v.ncols();
    (v.transpose() * v - DMatrix::identity(n, n)).norm()
}

/// Checks that a vector has unit Euclidean norm within `1e-10`.
pub fn check_unit(v: &DVector<f64>, name: &str) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("{name} must be a unit vector, norm is {norm}")));
    }
    Ok(())
}

/// Signed measure `Σ_i (v_iᵀa)(v_iᵀb) δ_{λ_i}`, merged over repeated eigenvalues.
///
/// With `a = b` this is the spectral measure of `a` with respect to the
/// matrix; the weights then sum to `‖a‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpectrum {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PairSpectrum {
    /// Projects two vectors on the eigenbasis of `s`.
    pub fn new(s: &Spectrum, a: &DVector<f64>, b: &DVector<f64>) -> Result<Self> {
        let p = s.values.len();
        if a.len() != p || b.len() != p {
            return Err(Error::InvalidInput(format!(
                "vectors of length {} and {} do not match dimension {p}",
                a.len(),
                b.len()
            )));
        }
        let qa = s.vectors.tr_mul(a);
        let qb = s.vectors.tr_mul(b);
        let scale = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut atoms: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for i in 0..p {
            let l = s.values[i];
            let w = qa[i] * qb[i];
            match atoms.last() {
                Some(&last) if (l - last).abs() <= 1e-12 * scale => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(l);
                    weights.push(w);
                }
            }
        }
        Ok(Self { atoms, weights })
    }

    /// Iterates over `(atom, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// Total signed mass.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}
