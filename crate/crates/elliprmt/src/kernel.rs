//! Covariance kernels of the bilinear-form CLT and the covariance of
//! eigenvector statistics obtained by double contour integration.
//!
//! For unit vectors `π1..π4` the limiting covariance of
//! `M_r(z) = √p (π_{2r-1}ᵀ(S − z)^{-1}π_{2r} + z⁻¹π_{2r-1}ᵀ(I + g2Σ)^{-1}π_{2r})` is
//!
//! ```text
//! h1 r14 r23 + h1 r13 r24 + h2 r12(z1) r34(z2)
//! ```
//!
//! with the two-point functionals `r_jk(z1, z2) = π_jᵀ(I+g2(z1)Σ)^{-1}Σ(I+g2(z2)Σ)^{-1}π_k`
//! and the one-point functionals `r_jk(z) = π_jᵀ(I+g2(z)Σ)^{-2}Σπ_k`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{PairSpectrum, Spectrum};
use crate::lsd::{LsdDerivatives, LsdModel, LsdSolution};

/// Solution and derivatives at one spectral argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub sol: LsdSolution,
    pub der: LsdDerivatives,
}

impl KernelPoint {
    /// Solves anywhere off the support and differentiates.
    pub fn new(model: &LsdModel, z: Complex64) -> Result<Self> {
        let sol = model.solve_any(z)?;
        let der = model.derivatives(&sol)?;
        Ok(Self { sol, der })
    }

    /// Point at `z̄` from the point at `z`.
    pub fn conj(&self) -> Self {
        let c = |v: Complex64| v.conj();
        Self {
            sol: crate::lsd::conjugate(&self.sol),
            der: LsdDerivatives {
                g1p: c(self.der.g1p),
                g2p: c(self.der.g2p),
                m_under_p: c(self.der.m_under_p),
                zg2_p: c(self.der.zg2_p),
                zm_under_p: c(self.der.zm_under_p),
                mu_over_g2_p: c(self.der.mu_over_g2_p),
            },
        }
    }
}

/// Two-point kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValues {
    pub z1: Complex64,
    pub z2: Complex64,
    pub h1: Complex64,
    pub h2: Complex64,
    pub d: Complex64,
    /// The denominator combination `1 − d(z1, z2)` shared by `h1`.
    pub w: Complex64,
}

/// Kernels from precomputed points.
pub fn kernels_from(c: f64, a: &KernelPoint, b: &KernelPoint) -> Result<KernelValues> {
    let (z1, z2) = (a.sol.z, b.sol.z);
    let (g1a, g1b) = (a.sol.g1, b.sol.g1);
    let (g2a, g2b) = (a.sol.g2, b.sol.g2);
    let dg1 = g1a - g1b;
    let dg2 = g2a - g2b;
    if dg1.norm() < 1e-12 || dg2.norm() < 1e-12 {
        return Err(Error::NearCoincident { z1, z2 });
    }
    let zg2 = z1 * g2a - z2 * g2b;
    let d = (z1 * g1a - z2 * g1b) / dg1 * (zg2 / dg2) / (z1 * z2);
    let w = 1.0 - d;
    let h1 = c * zg2 / (z1 * z1 * z2 * z2 * dg1 * w);
    let h2 = c * a.der.g2p * b.der.g2p * (a.sol.m_under * g2b - b.sol.m_under * g2a) / (g2a * g2b * dg1);
    Ok(KernelValues { z1, z2, h1, h2, d, w })
}

/// Kernels at two distinct arguments.
pub fn kernels(model: &LsdModel, z1: Complex64, z2: Complex64) -> Result<KernelValues> {
    let a = KernelPoint::new(model, z1)?;
    let b = KernelPoint::new(model, z2)?;
    kernels_from(model.c, &a, &b)
}

/// Diagonal limits of the kernels and the GOE variance profile at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalKernels {
    pub z: Complex64,
    /// `lim h1(z1, z2)` as `z1, z2 → z`.
    pub h1: Complex64,
    /// `lim h2(z1, z2)` as `z1, z2 → z`.
    pub h2: Complex64,
    /// `z⁴ (2 h1 + h2)`.
    pub sigma11_sq: Complex64,
    /// `z⁴ h1`.
    pub sigma12_sq: Complex64,
}

impl DiagonalKernels {
    fn from_limits(z: Complex64, h1: Complex64, h2: Complex64) -> Self {
        let z4 = z * z * z * z;
        Self {
            z,
            h1,
            h2,
            sigma11_sq: z4 * (2.0 * h1 + h2),
            sigma12_sq: z4 * h1,
        }
    }
}

/// Closed-form diagonal limits:
/// `h1 = c (z g2)' g2' / (z² (z m̲)')` and `h2 = c g2'² (m̲/g2)' / g1'`.
pub fn diagonal_from(c: f64, pt: &KernelPoint) -> Result<DiagonalKernels> {
    let z = pt.sol.z;
    let d = &pt.der;
    if d.zm_under_p.norm() == 0.0 || d.g1p.norm() == 0.0 {
        return Err(Error::Degenerate { z, det: 0.0 });
    }
    let h1 = c * d.zg2_p * d.g2p / (z * z * d.zm_under_p);
    let h2 = c * d.g2p * d.g2p * d.mu_over_g2_p / d.g1p;
    Ok(DiagonalKernels::from_limits(z, h1, h2))
}

/// Diagonal kernels at `z` from derivatives.
pub fn kernels_diagonal(model: &LsdModel, z: Complex64) -> Result<DiagonalKernels> {
    diagonal_from(model.c, &KernelPoint::new(model, z)?)
}

/// Diagonal kernels by Richardson extrapolation of the two-point kernels at
/// `(z, z + iδ)` for `δ ∈ {1e-3, 1e-4, 1e-5}`.
pub fn kernels_diagonal_extrapolated(model: &LsdModel, z: Complex64) -> Result<DiagonalKernels> {
    let a = KernelPoint::new(model, z)?;
    let deltas = [1e-3, 1e-4, 1e-5];
    let mut h1s = [Complex64::new(0.0, 0.0); 3];
    let mut h2s = [Complex64::new(0.0, 0.0); 3];
    for (i, &dl) in deltas.iter().enumerate() {
        let b = KernelPoint::new(model, z + Complex64::new(0.0, dl))?;
        let k = kernels_from(model.c, &a, &b)?;
        h1s[i] = k.h1;
        h2s[i] = k.h2;
    }
    // Quadratic in δ through three points, evaluated at δ = 0.
    let lagrange0 = |f: &[Complex64; 3]| -> Complex64 {
        let [x0, x1, x2] = deltas;
        f[0] * (x1 * x2 / ((x0 - x1) * (x0 - x2)))
            + f[1] * (x0 * x2 / ((x1 - x0) * (x1 - x2)))
            + f[2] * (x0 * x1 / ((x2 - x0) * (x2 - x1)))
    };
    Ok(DiagonalKernels::from_limits(z, lagrange0(&h1s), lagrange0(&h2s)))
}

/// One- and two-point functionals of a pair of vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RFunctionals {
    /// `r_jk(z1, z2)`.
    pub r_two_point: Complex64,
    /// `r_jk(z1)`.
    pub r_one_point: Complex64,
    /// `r_jk(z2)`.
    pub r_one_point_second: Complex64,
}

fn pole_check(g2: Complex64, l: f64) -> Result<Complex64> {
    let den = 1.0 + g2 * l;
    if den.norm() < 1e-12 {
        return Err(Error::Pole {
            z: g2,
            detail: format!("I + g2 Σ is singular at eigenvalue {l}"),
        });
    }
    Ok(den)
}

/// `Σ_i w_i λ_i / ((1 + a λ_i)(1 + b λ_i))`.
pub fn r_two_point(ps: &PairSpectrum, a: Complex64, b: Complex64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, w) in ps.iter() {
        acc += w * l / (pole_check(a, l)? * pole_check(b, l)?);
    }
    Ok(acc)
}

/// `Σ_i w_i λ_i / (1 + g λ_i)²`.
pub fn r_one_point(ps: &PairSpectrum, g: Complex64) -> Result<Complex64> {
    r_two_point(ps, g, g)
}

/// Deterministic equivalent `−z⁻¹ π1ᵀ(I + g2 Σ)^{-1}π2`.
pub fn deterministic_equivalent(ps: &PairSpectrum, z: Complex64, g2: Complex64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, w) in ps.iter() {
        acc += w / pole_check(g2, l)?;
    }
    Ok(-acc / z)
}

/// Both functionals of `(π_j, π_k)` at `g2(z1), g2(z2)`.
pub fn r_functionals(sigma: &Spectrum, g2_at: [Complex64; 2], pi_j: &DVector<f64>, pi_k: &DVector<f64>) -> Result<RFunctionals> {
    let ps = PairSpectrum::new(sigma, pi_j, pi_k)?;
    Ok(RFunctionals {
        r_two_point: r_two_point(&ps, g2_at[0], g2_at[1])?,
        r_one_point: r_one_point(&ps, g2_at[0])?,
        r_one_point_second: r_one_point(&ps, g2_at[1])?,
    })
}

/// `Cov(M1(z1), M2(z2))` for the vector quadruple `pis`.
///
/// Equal arguments use the closed-form diagonal limits.
pub fn cov_m(model: &LsdModel, sigma: &Spectrum, pis: [&DVector<f64>; 4], z1: Complex64, z2: Complex64) -> Result<Complex64> {
    let a = KernelPoint::new(model, z1)?;
    let b = if z1 == z2 { a } else { KernelPoint::new(model, z2)? };
    cov_m_from(model.c, sigma, pis, &a, &b)
}

/// [`cov_m`] with precomputed points.
pub fn cov_m_from(c: f64, sigma: &Spectrum, pis: [&DVector<f64>; 4], a: &KernelPoint, b: &KernelPoint) -> Result<Complex64> {
    let (h1, h2) = if a.sol.z == b.sol.z {
        let d = diagonal_from(c, a)?;
        (d.h1, d.h2)
    } else {
        let k = kernels_from(c, a, b)?;
        (k.h1, k.h2)
    };
    let (ga, gb) = (a.sol.g2, b.sol.g2);
    let pair = |j: usize, k: usize| PairSpectrum::new(sigma, pis[j], pis[k]);
    let r14 = r_two_point(&pair(0, 3)?, ga, gb)?;
    let r23 = r_two_point(&pair(1, 2)?, ga, gb)?;
    let r13 = r_two_point(&pair(0, 2)?, ga, gb)?;
    let r24 = r_two_point(&pair(1, 3)?, ga, gb)?;
    let r12 = r_one_point(&pair(0, 1)?, ga)?;
    let r34 = r_one_point(&pair(2, 3)?, gb)?;
    Ok(h1 * r14 * r23 + h1 * r13 * r24 + h2 * r12 * r34)
}

/// Quadrature rule along each side of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    Trapezoid,
    GaussLegendre,
}

/// Rectangle `[x_left, x_right] × [−v0, v0]` traversed counter-clockwise,
/// with a second rectangle offset outward by `separation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleContour {
    pub x_left: f64,
    pub x_right: f64,
    pub v0: f64,
    pub separation: f64,
    pub quadrature: Quadrature,
}

/// Node `z` with complex weight `dz`.
pub type ContourNode = (Complex64, Complex64);

fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    // Golub–Welsch on the Jacobi matrix of the Legendre recurrence.
    let mut j = nalgebra::DMatrix::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let s = crate::linalg::sym_eigen(j)?;
    let w = (0..n).map(|i| 2.0 * s.vectors[(0, i)].powi(2)).collect();
    Ok((s.values, w))
}

impl RectangleContour {
    /// Default contour around the support of `model`.
    ///
    /// The right side sits at 1.2 times the outer support bracket. The left
    /// side sits at the lower edge divided by 1.2 when the spectrum stays
    /// away from zero, otherwise at a negative abscissa so that the origin is
    /// enclosed.
    pub fn around(model: &LsdModel) -> Result<Self> {
        let support = model.support()?;
        let (bl, br) = model.support_bracket();
        let right = br.max(support.upper) * 1.2;
        let lower = if bl > 0.0 { bl.min(support.lower) } else { support.lower };
        let x_left = if support.point_mass_at_zero == 0.0 && lower > 0.0 {
            lower / 1.2
        } else {
            -0.1 * right
        };
        let c = Self {
            x_left,
            x_right: right,
            v0: 0.5,
            separation: 0.05,
            quadrature: Quadrature::Trapezoid,
        };
        c.validate()?;
        Ok(c)
    }

    /// Checks that the two rectangles are nested and nondegenerate.
    pub fn validate(&self) -> Result<()> {
        if !(self.x_left < self.x_right && self.v0 > 0.0 && self.separation > 0.0) {
            return Err(Error::Config(format!("degenerate contour {self:?}")));
        }
        if self.separation >= self.v0 {
            return Err(Error::Config("contours overlap: separation must be below v0".into()));
        }
        Ok(())
    }

    fn left_offset(&self) -> f64 {
        if self.x_left > 0.0 {
            self.separation.min(self.x_left / 2.0)
        } else {
            self.separation
        }
    }

    /// Nodes of the inner (`outer = false`) or outer rectangle with `n` nodes per side.
    pub fn nodes(&self, n: usize, outer: bool) -> Result<Vec<ContourNode>> {
        self.validate()?;
        if n < 2 {
            return Err(Error::Config("quadrature needs at least 2 nodes per side".into()));
        }
        let (xl, xr, v) = if outer {
            (self.x_left - self.left_offset(), self.x_right + self.separation, self.v0 + self.separation)
        } else {
            (self.x_left, self.x_right, self.v0)
        };
        let corners = [
            Complex64::new(xl, -v),
            Complex64::new(xr, -v),
            Complex64::new(xr, v),
            Complex64::new(xl, v),
        ];
        let mut out = Vec::with_capacity(4 * n);
        match self.quadrature {
            Quadrature::Trapezoid => {
                for s in 0..4 {
                    let (a, b) = (corners[s], corners[(s + 1) % 4]);
                    let h = (b - a) / n as f64;
                    let prev = (a - corners[(s + 3) % 4]) / n as f64;
                    out.push((a, 0.5 * (h + prev)));
                    for k in 1..n {
                        out.push((a + h * k as f64, h));
                    }
                }
            }
            Quadrature::GaussLegendre => {
                let (x, w) = gauss_legendre(n)?;
                for s in 0..4 {
                    let (a, b) = (corners[s], corners[(s + 1) % 4]);
                    let half = (b - a) * 0.5;
                    for k in 0..n {
                        out.push((a + half * (1.0 + x[k]), half * w[k]));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Solutions along a contour, reusing conjugate symmetry.
fn contour_points(model: &LsdModel, nodes: &[ContourNode]) -> Result<Vec<KernelPoint>> {
    nodes
        .par_iter()
        .map(|&(z, _)| {
            if z.im < 0.0 {
                KernelPoint::new(model, z.conj()).map(|p| p.conj())
            } else {
                KernelPoint::new(model, z)
            }
        })
        .collect()
}

/// `∫ ζ dF` for the reference law with Stieltjes transform
/// `s(z) = −z⁻¹ ∫ 1/(1 + g2 t) dμπ(t)`, via `−(2πi)⁻¹ ∮ ζ s dz`.
pub fn reference_integral(
    model: &LsdModel,
    ps: &PairSpectrum,
    zeta: impl Fn(Complex64) -> Complex64 + Sync,
    contour: &RectangleContour,
    quad_n: usize,
) -> Result<f64> {
    let nodes = contour.nodes(quad_n, false)?;
    let pts = contour_points(model, &nodes)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for ((z, dz), pt) in nodes.iter().zip(&pts) {
        let s = deterministic_equivalent(ps, *z, pt.sol.g2)?;
        acc += zeta(*z) * s * dz;
    }
    let i2pi = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    Ok((-acc / i2pi).re)
}

/// Covariance of `√p ∫ζ_t dG` and `√p ∫ζ_s dG` for the VESD process of `π`:
/// `−(4π²)⁻¹ ∮∮ ζ_t(z1) ζ_s(z2) ϖ(z1, z2) dz1 dz2` with
/// `ϖ = 2 h1 r11(z1,z2)² + h2 r11(z1) r11(z2)`.
pub fn eigvec_stat_cov(
    model: &LsdModel,
    sigma: &Spectrum,
    pi: &DVector<f64>,
    zeta_t: impl Fn(Complex64) -> Complex64 + Sync,
    zeta_s: impl Fn(Complex64) -> Complex64 + Sync,
    contour: &RectangleContour,
    quad_n: usize,
) -> Result<f64> {
    let fs: [&TestFunction; 2] = [&zeta_t, &zeta_s];
    Ok(eigvec_stat_cov_matrix(model, sigma, pi, &fs, contour, quad_n)?[0][1])
}

/// Analytic test function evaluated on the contour.
pub type TestFunction<'a> = dyn Fn(Complex64) -> Complex64 + Sync + 'a;

/// Full covariance matrix of [`eigvec_stat_cov`] over several test functions,
/// sharing one evaluation of `ϖ` on the node grid.
pub fn eigvec_stat_cov_matrix(
    model: &LsdModel,
    sigma: &Spectrum,
    pi: &DVector<f64>,
    zetas: &[&TestFunction<'_>],
    contour: &RectangleContour,
    quad_n: usize,
) -> Result<Vec<Vec<f64>>> {
    let k = zetas.len();
    let ps = PairSpectrum::new(sigma, pi, pi)?;
    let inner = contour.nodes(quad_n, false)?;
    let outer = contour.nodes(quad_n, true)?;
    let pin = contour_points(model, &inner)?;
    let pout = contour_points(model, &outer)?;
    let r_in: Vec<Complex64> = pin.iter().map(|p| r_one_point(&ps, p.sol.g2)).collect::<Result<_>>()?;
    let r_out: Vec<Complex64> = pout.iter().map(|p| r_one_point(&ps, p.sol.g2)).collect::<Result<_>>()?;
    // ζ_s(z2) dz2 on the outer contour.
    let zs_out: Vec<Vec<Complex64>> = zetas
        .iter()
        .map(|f| outer.iter().map(|&(z, dz)| f(z) * dz).collect())
        .collect();
    let c = model.c;
    let rows: Vec<Vec<Complex64>> = (0..inner.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<Complex64>> {
            let (z1, dz1) = inner[i];
            let a = &pin[i];
            let mut acc = vec![Complex64::new(0.0, 0.0); k];
            for j in 0..outer.len() {
                let b = &pout[j];
                let kv = kernels_from(c, a, b)?;
                let r12 = r_two_point(&ps, a.sol.g2, b.sol.g2)?;
                let varpi = 2.0 * kv.h1 * r12 * r12 + kv.h2 * r_in[i] * r_out[j];
                for (s, col) in zs_out.iter().enumerate() {
                    acc[s] += col[j] * varpi;
                }
            }
            // Row entry (t, s) = ζ_t(z1) dz1 Σ_j ζ_s(z2) ϖ dz2.
            Ok((0..k * k)
                .map(|ts| zetas[ts / k](z1) * dz1 * acc[ts % k])
                .collect())
        })
        .collect::<Result<_>>()?;
    let scale = -1.0 / (4.0 * std::f64::consts::PI.powi(2));
    let mut out = vec![vec![0.0; k]; k];
    for ts in 0..k * k {
        let total: Complex64 = rows.iter().map(|r| r[ts]).sum();
        out[ts / k][ts % k] = (total * scale).re;
    }
    Ok(out)
}

/// Writes a kernel grid as CSV.
pub fn write_kernel_csv<W: std::io::Write>(values: &[KernelValues], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "re_z1", "im_z1", "re_z2", "im_z2", "re_h1", "im_h1", "re_h2", "im_h2", "re_d", "im_d",
    ])?;
    for k in values {
        wtr.write_record(
            [k.z1, k.z2, k.h1, k.h2, k.d]
                .iter()
                .flat_map(|v| [format!("{:e}", v.re), format!("{:e}", v.im)]),
        )?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
