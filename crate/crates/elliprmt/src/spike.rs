//! First-order limits and fluctuations of spiked eigenvalues and eigenvectors.
//!
//! A supercritical spike `α` produces an outlier at `θ` with `g2(θ) = −1/α`,
//! where `g2` belongs to the limiting law of the non-spiked part. The
//! outlier satisfies `√n(λ̂/θ − 1) → N(0, σ_Δ²)` and the squared cosine
//! between sample and population eigenvectors tends to `α𝒢'(θ)/θ` with
//! `𝒢' = 1/(α² g2'(θ))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{diagonal_from, KernelPoint};
use crate::lsd::{LsdModel, LsdSolution};
use crate::measure::DiscreteMeasure;

/// Relative offsets above the right edge tried in turn when the solver
/// cannot settle on the real axis right at the edge.
const EDGE_NUDGES: [f64; 4] = [1e-6, 1e-5, 1e-4, 1e-3];

/// Brent's method on `[a, b]` with `f(a) f(b) ≤ 0`.
pub fn brent(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Domain(format!("root not bracketed on [{a}, {b}]: f = {fa}, {fb}")));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < xtol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < xtol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < xtol
        };
        bisected = outside || slow;
        if bisected {
            s = (a + b) / 2.0;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(Error::NonConvergence {
        z: Complex64::new(b, 0.0),
        iterations: max_iter,
        residual: fb.abs(),
    })
}

/// Real solutions at `edge·(1+δ)` and `edge·(1+4δ)` for the smallest
/// workable nudge `δ`.
fn edge_solutions(model: &LsdModel) -> Result<(LsdSolution, LsdSolution)> {
    let edge = model.support()?.upper;
    let mut last = None;
    for nudge in EDGE_NUDGES {
        let pair = model
            .solve_real(edge * (1.0 + nudge))
            .and_then(|a| Ok((a, model.solve_real(edge * (1.0 + 4.0 * nudge))?)));
        match pair {
            Ok(p) => return Ok(p),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// `g2` at the edge. `g2` has a square-root singularity there, so the
/// values at `δ` and `4δ` are extrapolated linearly in `√δ`.
fn edge_g2(near: &LsdSolution, far: &LsdSolution) -> f64 {
    2.0 * near.g2.re - far.g2.re
}

/// Detection threshold `−1/g2(edge⁺)`: spikes at or below it stick to the bulk.
pub fn spike_threshold(model: &LsdModel) -> Result<f64> {
    let (near, far) = edge_solutions(model)?;
    Ok(-1.0 / edge_g2(&near, &far))
}

/// Outlier location `θ` with `g2(θ) = −1/α`, returned with the solution there.
pub fn transition(model: &LsdModel, alpha: f64) -> Result<LsdSolution> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!("spike must be positive and finite, got {alpha}")));
    }
    let (edge, far) = edge_solutions(model)?;
    let threshold = -1.0 / edge_g2(&edge, &far);
    if alpha <= threshold {
        return Err(Error::Subcritical { alpha, threshold });
    }
    if edge.g2.re + 1.0 / alpha >= 0.0 {
        return Err(Error::Domain(format!(
            "spike {alpha} is too close to the threshold {threshold:.6} to locate its outlier"
        )));
    }
    let f = |x: f64| -> Result<f64> { Ok(model.solve_real(x)?.g2.re + 1.0 / alpha) };
    let lo = edge.z.re;
    let mut hi = 10.0 * lo + 10.0 * alpha;
    let mut tries = 0;
    while f(hi)? < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Domain(format!("could not bracket the outlier of spike {alpha}")));
        }
    }
    let theta = brent(f, lo, hi, 1e-13 * hi, 200)?;
    model.solve_real(theta)
}

/// Asymptotic predictions for one spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikePrediction {
    pub alpha: f64,
    pub theta: f64,
    pub g2_prime: f64,
    /// `𝒢'(θ) = 1/(α² g2'(θ))`.
    pub g_prime: f64,
    /// Variance of `√n(λ̂/θ − 1)`.
    pub sigma_delta_sq: f64,
    /// Limit of the squared cosine with the population eigenvector.
    pub overlap_sq: f64,
    /// Diagonal entry variance of the limiting GOE-type matrix.
    pub sigma11_sq: f64,
    /// Off-diagonal entry variance of the limiting GOE-type matrix.
    pub sigma12_sq: f64,
}

/// `σ_Δ² = 2(θg2)'/((θm̲)' g2' θ²) + (m̲/g2)'/g1'` at a real point.
pub fn sigma_delta_sq(pt: &KernelPoint) -> f64 {
    let t = pt.sol.z.re;
    let d = &pt.der;
    (2.0 * d.zg2_p / (d.zm_under_p * d.g2p * t * t) + d.mu_over_g2_p / d.g1p).re
}

/// Predictions for a supercritical spike.
pub fn predict(model: &LsdModel, alpha: f64) -> Result<SpikePrediction> {
    let sol = transition(model, alpha)?;
    let der = model.derivatives(&sol)?;
    let pt = KernelPoint { sol, der };
    let theta = sol.z.re;
    let g2p = der.g2p.re;
    let g_prime = 1.0 / (alpha * alpha * g2p);
    let diag = diagonal_from(model.c, &pt)?;
    Ok(SpikePrediction {
        alpha,
        theta,
        g2_prime: g2p,
        g_prime,
        sigma_delta_sq: sigma_delta_sq(&pt),
        overlap_sq: alpha * g_prime / theta,
        sigma11_sq: diag.sigma11_sq.re,
        sigma12_sq: diag.sigma12_sq.re,
    })
}

/// Light-tail outlier map `ψ(α) = α + cα ∫ t/(α − t) dH1(t)`.
pub fn psi_light_tail(c: f64, h1: &DiscreteMeasure, alpha: f64) -> f64 {
    alpha + c * alpha * h1.integrate_real(|t| t / (alpha - t))
}

/// Light-tail closed forms for `H1 = δ1`: `(θ, σ_Δ², overlap²)`.
pub fn light_tail_identity(c: f64, alpha: f64) -> (f64, f64, f64) {
    let theta = alpha + c * alpha / (alpha - 1.0);
    let q = 1.0 - c / ((alpha - 1.0) * (alpha - 1.0));
    let sigma = 2.0 * alpha * alpha * q / (theta * theta);
    let overlap = q / (1.0 + c / (alpha - 1.0));
    (theta, sigma, overlap)
}

/// Covariance `Cov(𝒪_ij, 𝒪_kl)` of the limiting symmetric Gaussian matrix.
pub fn goe_covariance_profile(sigma11_sq: f64, sigma12_sq: f64, i: usize, j: usize, k: usize, l: usize) -> f64 {
    if i == j && j == k && k == l {
        sigma11_sq
    } else if (i == k && j == l) || (i == l && j == k) {
        sigma12_sq
    } else {
        0.0
    }
}
