//! Fixed-point solver for the limiting spectral distribution of the
//! normalized sample covariance matrix under elliptical sampling.
//!
//! For a population spectrum `H1`, a normalized squared-radius law `H2` and
//! aspect ratio `c = p/n`, the auxiliary functions `g1`, `g2` solve
//!
//! ```text
//! z g1 = -c ∫ x / (1 + g2 x) dH1(x)
//! z g2 = -∫ y / (1 + g1 y) dH2(y)
//! ```
//!
//! and the Stieltjes transforms follow as `m = -z⁻¹ ∫ 1/(1 + g2 x) dH1` and
//! `m̲ = -1/z - g1 g2`. When `H2 = δ1` the companion transform coincides with
//! `g2` and the system collapses to the Marchenko–Pastur equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Imaginary offsets used to reach the real axis from above.
const REAL_LADDER: [f64; 11] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

/// `ℑg2` must shrink by at least this factor per decade of `ε` outside the bulk.
const INSIDE_RATIO: f64 = 0.5;

/// Offset used for the point mass at the origin, `F({0}) ≈ ε ℑm(iε)`.
const ZERO_MASS_EPS: f64 = 1e-7;

/// Iteration controls for [`LsdModel::solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute tolerance on both defining equations.
    pub tol: f64,
    /// Iteration budget for the damped alternation.
    pub max_iter: usize,
    /// Damping weight `ω` on the `g2` update.
    pub damping: f64,
    /// Newton attempts start after this many damped iterations and repeat at the same period.
    pub newton_after: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            damping: 0.5,
            newton_after: 200,
        }
    }
}

/// Solution of the system at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsdSolution {
    pub z: Complex64,
    pub g1: Complex64,
    pub g2: Complex64,
    /// Stieltjes transform of the limiting spectral distribution.
    pub m: Complex64,
    /// Stieltjes transform of the companion distribution.
    pub m_under: Complex64,
    pub iterations: usize,
    /// Largest absolute residual of the two defining equations.
    pub residual: f64,
    /// Set when one input law is the point mass at zero.
    pub trivial: bool,
}

/// First derivatives in `z` and the composites used by the fluctuation formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsdDerivatives {
    pub g1p: Complex64,
    pub g2p: Complex64,
    pub m_under_p: Complex64,
    /// `(z g2)'`
    pub zg2_p: Complex64,
    /// `(z m̲)'`
    pub zm_under_p: Complex64,
    /// `(m̲ / g2)'`
    pub mu_over_g2_p: Complex64,
}

/// Density and distribution function of a Stieltjes transform on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    /// Point mass at zero plus the trapezoid integral of the density.
    pub cdf: Vec<f64>,
    pub point_mass_at_zero: f64,
    pub eps: f64,
}

impl SpectralDensity {
    /// Writes `x,density,cdf` CSV.
    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["x", "density", "cdf"])?;
        for i in 0..self.x.len() {
            wtr.write_record([
                format!("{:e}", self.x[i]),
                format!("{:e}", self.density[i]),
                format!("{:e}", self.cdf[i]),
            ])?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Hull of the continuous part of the limiting spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
    pub point_mass_at_zero: f64,
}

/// The triple `(c, H1, H2)` that determines the limiting spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsdModel {
    pub c: f64,
    pub h1: DiscreteMeasure,
    pub h2: DiscreteMeasure,
}

/// `(∫ t/(1+gt) dμ, ∫ t²/(1+gt)² dμ)` in one pass.
#[inline]
fn moments(mu: &DiscreteMeasure, g: Complex64) -> (Complex64, Complex64) {
    let mut a = Complex64::new(0.0, 0.0);
    let mut b = Complex64::new(0.0, 0.0);
    for (&t, &w) in mu.atoms().iter().zip(mu.weights()) {
        let q = t / (1.0 + g * t);
        a += q * w;
        b += q * q * w;
    }
    (a, b)
}

fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl LsdModel {
    /// Validates `c > 0` and nonnegative atoms for both laws.
    pub fn new(c: f64, h1: DiscreteMeasure, h2: DiscreteMeasure) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("c must be positive, got {c}")));
        }
        if h1.min() < 0.0 || h2.min() < 0.0 {
            return Err(Error::InvalidInput("H1 and H2 must be supported on [0, ∞)".into()));
        }
        Ok(Self { c, h1, h2 })
    }

    /// Marchenko–Pastur model: `H1 = H2 = δ1`.
    pub fn marchenko_pastur(c: f64) -> Result<Self> {
        Self::new(c, DiscreteMeasure::dirac(1.0), DiscreteMeasure::dirac(1.0))
    }

    /// True when `H2 = δ1`, where `m̲ = g2` identically.
    pub fn is_light_tail(&self) -> bool {
        self.h2.is_unit_dirac()
    }

    /// True when one of the laws is the point mass at zero.
    pub fn is_trivial(&self) -> bool {
        self.h1.is_zero_dirac() || self.h2.is_zero_dirac()
    }

    /// Residuals `(z g1 + c∫…, z g2 + ∫…)`.
    pub fn residuals(&self, z: Complex64, g1: Complex64, g2: Complex64) -> (Complex64, Complex64) {
        let (a1, _) = moments(&self.h1, g2);
        let (a2, _) = moments(&self.h2, g1);
        (z * g1 + a1 * self.c, z * g2 + a2)
    }

    fn residual_norm(&self, z: Complex64, g1: Complex64, g2: Complex64) -> f64 {
        let (f1, f2) = self.residuals(z, g1, g2);
        f1.norm().max(f2.norm())
    }

    fn finish(&self, z: Complex64, g1: Complex64, g2: Complex64, iterations: usize, trivial: bool) -> LsdSolution {
        let m = -self
            .h1
            .integrate_unchecked(|x| Complex64::new(1.0, 0.0) / (1.0 + g2 * x))
            / z;
        let m_under = -1.0 / z - g1 * g2;
        let residual = if trivial { 0.0 } else { self.residual_norm(z, g1, g2) };
        LsdSolution {
            z,
            g1,
            g2,
            m,
            m_under,
            iterations,
            residual,
            trivial,
        }
    }

    fn trivial_solution(&self, z: Complex64) -> LsdSolution {
        let zero = Complex64::new(0.0, 0.0);
        if self.h1.is_zero_dirac() {
            let g2 = -self.h2.mean() / z;
            self.finish(z, zero, g2, 0, true)
        } else {
            let g1 = -self.c * self.h1.mean() / z;
            self.finish(z, g1, zero, 0, true)
        }
    }

    /// Uniqueness-set membership for `ℑz > 0`, with a small rounding allowance.
    pub fn in_uniqueness_set(sol: &LsdSolution) -> bool {
        let slack = 1e-12;
        sol.m.im > -slack && (sol.z * sol.g1).im > -slack && sol.g2.im > -slack
    }

    /// Newton iteration on the 2×2 complex system starting from `(g1, g2)`.
    pub fn newton(
        &self,
        z: Complex64,
        mut g1: Complex64,
        mut g2: Complex64,
        tol: f64,
        max_steps: usize,
    ) -> Option<(Complex64, Complex64, usize)> {
        let c = self.c;
        for step in 0..max_steps {
            let (a1, i1) = moments(&self.h1, g2);
            let (a2, i2) = moments(&self.h2, g1);
            let f1 = z * g1 + a1 * c;
            let f2 = z * g2 + a2;
            if !(is_finite(f1) && is_finite(f2)) {
                return None;
            }
            if f1.norm().max(f2.norm()) < tol {
                return Some((g1, g2, step));
            }
            // Jacobian [[z, -c I1], [-I2, z]].
            let det = z * z - i1 * i2 * c;
            if det.norm() == 0.0 || !is_finite(det) {
                return None;
            }
            let d1 = (z * f1 + c * i1 * f2) / det;
            let d2 = (i2 * f1 + z * f2) / det;
            g1 -= d1;
            g2 -= d2;
        }
        let res = self.residual_norm(z, g1, g2);
        (res < tol).then_some((g1, g2, max_steps))
    }

    /// Solves at `z` with `ℑz > 0` by damped alternation with a Newton fallback.
    pub fn solve(&self, z: Complex64, opts: &SolverOptions) -> Result<LsdSolution> {
        self.solve_from(z, opts, None)
    }

    /// Same as [`solve`](Self::solve) but first tries Newton from `guess = (g1, g2)`.
    pub fn solve_from(
        &self,
        z: Complex64,
        opts: &SolverOptions,
        guess: Option<(Complex64, Complex64)>,
    ) -> Result<LsdSolution> {
        if !(z.im > 0.0) || !is_finite(z) {
            return Err(Error::InvalidInput(format!("solve needs Im z > 0, got {z}")));
        }
        if !(opts.tol > 0.0 && opts.tol <= 1e-6) {
            return Err(Error::InvalidInput(format!("tol must lie in (0, 1e-6], got {}", opts.tol)));
        }
        if self.is_trivial() {
            return Ok(self.trivial_solution(z));
        }
        if let Some((g1, g2)) = guess {
            if let Some((g1, g2, it)) = self.newton(z, g1, g2, opts.tol, 30) {
                let sol = self.finish(z, g1, g2, it, false);
                if Self::in_uniqueness_set(&sol) {
                    return Ok(sol);
                }
            }
        }
        let c = self.c;
        let omega = opts.damping;
        let mut g1;
        let mut g2 = -1.0 / z;
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            g1 = -self.h1.integrate_unchecked(|x| x / (1.0 + g2 * x)) * c / z;
            let g2_new = -self.h2.integrate_unchecked(|y| y / (1.0 + g1 * y)) / z;
            g2 = g2 * (1.0 - omega) + g2_new * omega;
            residual = self.residual_norm(z, g1, g2);
            if !residual.is_finite() {
                break;
            }
            if residual < opts.tol {
                return Ok(self.finish(z, g1, g2, it, false));
            }
            if it % opts.newton_after == 0 {
                if let Some((n1, n2, steps)) = self.newton(z, g1, g2, opts.tol, 50) {
                    let sol = self.finish(z, n1, n2, it + steps, false);
                    if Self::in_uniqueness_set(&sol) {
                        return Ok(sol);
                    }
                }
            }
        }
        Err(Error::NonConvergence {
            z,
            iterations: opts.max_iter,
            residual,
        })
    }

    /// Solves at `x + iε` by walking `ε` down from 1 with Newton continuation.
    ///
    /// Returns the solutions at every visited offset, ending at `eps`.
    pub fn solve_ladder(&self, x: f64, eps: f64, opts: &SolverOptions) -> Result<Vec<LsdSolution>> {
        let mut out: Vec<LsdSolution> = Vec::new();
        let mut steps: Vec<f64> = REAL_LADDER.iter().copied().filter(|&e| e > eps * 1.000001).collect();
        steps.push(eps);
        for &e in &steps {
            let z = Complex64::new(x, e);
            let guess = out.last().map(|s| (s.g1, s.g2));
            out.push(self.solve_from(z, opts, guess)?);
        }
        Ok(out)
    }

    /// `ℑg2` decays linearly in `ε` outside the support and stays bounded away from 0 inside.
    /// Far from the support `ℑg2` sits at rounding level and counts as outside.
    fn inside_ratio(ladder: &[LsdSolution], e_hi: f64, e_lo: f64) -> Option<f64> {
        let hi = ladder.iter().find(|s| s.z.im == e_hi)?;
        let lo = ladder.iter().find(|s| s.z.im == e_lo)?;
        if lo.g2.im <= 1e-10 * lo.g2.norm() {
            return Some(0.0);
        }
        Some(lo.g2.im / hi.g2.im)
    }

    /// Whether `x` lies inside the support of the continuous part of the spectrum.
    pub fn is_inside_bulk(&self, x: f64) -> Result<bool> {
        if self.is_trivial() {
            return Ok(false);
        }
        let ladder = self.solve_ladder(x, 1e-10, &SolverOptions::default())?;
        let r = Self::inside_ratio(&ladder, 1e-9, 1e-10).unwrap_or(0.0);
        Ok(!(r < INSIDE_RATIO))
    }

    /// Real solution at `x` outside the bulk.
    ///
    /// Walks `z = x + iε` down to `ε = 1e-10`, rejects points where `ℑg2`
    /// fails to vanish with `ε`, then polishes with Newton on the real axis
    /// starting from a Richardson estimate of the real parts.
    pub fn solve_real(&self, x: f64) -> Result<LsdSolution> {
        if !x.is_finite() || x == 0.0 {
            return Err(Error::Domain(format!("real solve needs finite nonzero x, got {x}")));
        }
        let z = Complex64::new(x, 0.0);
        if self.is_trivial() {
            return Ok(self.trivial_solution(z));
        }
        let opts = SolverOptions::default();
        let ladder = self.solve_ladder(x, 1e-10, &opts)?;
        let r = Self::inside_ratio(&ladder, 1e-9, 1e-10).unwrap_or(0.0);
        if !(r < INSIDE_RATIO) {
            let g2 = ladder.last().unwrap().g2;
            return Err(Error::Domain(format!(
                "x = {x} lies inside the bulk (Im g2 = {:.3e} does not vanish)",
                g2.im
            )));
        }
        // Real parts carry an O(ε²) error; extrapolate from ε = 1e-3 and 1e-4.
        let at = |e: f64| ladder.iter().find(|s| s.z.im == e).unwrap();
        let (a, b) = (at(1e-3), at(1e-4));
        let rich = |u: f64, v: f64| v + (v - u) * 1e-8 / (1e-6 - 1e-8);
        let g1_0 = Complex64::new(rich(a.g1.re, b.g1.re), 0.0);
        let g2_0 = Complex64::new(rich(a.g2.re, b.g2.re), 0.0);
        let last = ladder.last().unwrap();
        let start = if self.residual_norm(z, g1_0, g2_0) < self.residual_norm(z, last.g1.re.into(), last.g2.re.into()) {
            (g1_0, g2_0)
        } else {
            (Complex64::new(last.g1.re, 0.0), Complex64::new(last.g2.re, 0.0))
        };
        match self.newton(z, start.0, start.1, opts.tol.max(1e-13), 60) {
            Some((g1, g2, it)) => {
                let sol = self.finish(z, g1, g2, it, false);
                if (sol.g1.im.abs() < 1e-7) && (sol.g2.im.abs() < 1e-7) {
                    Ok(sol)
                } else {
                    Err(Error::Domain(format!("x = {x}: real solution has imaginary part")))
                }
            }
            None => Err(Error::NonConvergence {
                z,
                iterations: 60,
                residual: self.residual_norm(z, start.0, start.1),
            }),
        }
    }

    /// Solves anywhere off the support: conjugation below the axis, the real
    /// continuation on it.
    pub fn solve_any(&self, z: Complex64) -> Result<LsdSolution> {
        let opts = SolverOptions::default();
        if z.im > 0.0 {
            self.solve(z, &opts)
        } else if z.im < 0.0 {
            Ok(conjugate(&self.solve(z.conj(), &opts)?))
        } else {
            self.solve_real(z.re)
        }
    }

    /// Derivatives from the linearised system
    /// `[z, -c I1; -I2, z] (g1', g2') = (-g1, -g2)`.
    pub fn derivatives(&self, sol: &LsdSolution) -> Result<LsdDerivatives> {
        let z = sol.z;
        let (g1, g2) = (sol.g1, sol.g2);
        let (_, i1) = moments(&self.h1, g2);
        let (_, i2) = moments(&self.h2, g1);
        let det = z * z - i1 * i2 * self.c;
        let scale = z.norm_sqr().max(1.0);
        if det.norm() < 1e-14 * scale || !is_finite(det) {
            return Err(Error::Degenerate { z, det: det.norm() });
        }
        // Cramer's rule for [[z, -cI1], [-I2, z]] (u, v) = (-g1, -g2).
        let g1p = (-g1 * z - g2 * i1 * self.c) / det;
        let g2p = (-g2 * z - g1 * i2) / det;
        let m_under_p = 1.0 / (z * z) - g1p * g2 - g1 * g2p;
        let mu = sol.m_under;
        Ok(LsdDerivatives {
            g1p,
            g2p,
            m_under_p,
            zg2_p: g2 + z * g2p,
            zm_under_p: mu + z * m_under_p,
            mu_over_g2_p: (m_under_p * g2 - mu * g2p) / (g2 * g2),
        })
    }

    /// Point mass of the limiting spectral distribution at zero.
    pub fn point_mass_at_zero(&self) -> Result<f64> {
        self.point_mass_at_zero_of(|s| s.m)
    }

    fn point_mass_at_zero_of(&self, f: impl Fn(&LsdSolution) -> Complex64) -> Result<f64> {
        // A genuine atom gives ε ℑm(iε) independent of ε; an integrable
        // singularity at the origin makes it decay with ε.
        let opts = SolverOptions::default();
        let at = |eps: f64| -> Result<f64> {
            let ladder = self.solve_ladder(0.0, eps, &opts)?;
            Ok((eps * f(ladder.last().unwrap()).im).clamp(0.0, 1.0))
        };
        let mass = at(ZERO_MASS_EPS)?;
        if mass < 1e-6 {
            return Ok(0.0);
        }
        let finer = at(ZERO_MASS_EPS * 1e-2)?;
        Ok(if finer < 0.5 * mass { 0.0 } else { finer })
    }

    /// Density `ℑm(x+iε)/π` and its distribution function on an ascending grid.
    pub fn stieltjes_invert(&self, grid: &[f64], eps: f64) -> Result<SpectralDensity> {
        self.stieltjes_invert_with(grid, eps, |s| s.m)
    }

    /// Inversion of an arbitrary transform built from the solution, such as
    /// the anisotropic law `s(z) = -z⁻¹ ∫ 1/(1 + g2 t) dμπ(t)`.
    pub fn stieltjes_invert_with(
        &self,
        grid: &[f64],
        eps: f64,
        f: impl Fn(&LsdSolution) -> Complex64,
    ) -> Result<SpectralDensity> {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("grid must be nonempty and strictly ascending".into()));
        }
        if !(1e-5..=1e-2).contains(&eps) {
            return Err(Error::InvalidInput(format!("eps must lie in [1e-5, 1e-2], got {eps}")));
        }
        let opts = SolverOptions::default();
        if self.is_trivial() {
            let mass = if self.point_mass_at_zero_of(&f)? > 0.5 { 1.0 } else { 0.0 };
            return Ok(SpectralDensity {
                x: grid.to_vec(),
                density: vec![0.0; grid.len()],
                cdf: grid.iter().map(|&x| if x >= 0.0 { mass } else { 0.0 }).collect(),
                point_mass_at_zero: mass,
                eps,
            });
        }
        let mass0 = self.point_mass_at_zero_of(&f)?;
        let mut density = Vec::with_capacity(grid.len());
        let mut prev: Option<LsdSolution> = None;
        for &x in grid {
            let z = Complex64::new(x, eps);
            let guess = prev.map(|s| (s.g1, s.g2));
            let sol = match guess.and_then(|g| self.solve_from(z, &opts, Some(g)).ok()) {
                Some(s) => s,
                None => *self
                    .solve_ladder(x, eps, &opts)
                    .map_err(|e| Error::Domain(format!("density solve failed at x = {x}: {e}")))?
                    .last()
                    .unwrap(),
            };
            let lorentz = mass0 * eps / (x * x + eps * eps);
            density.push(((f(&sol).im - lorentz) / std::f64::consts::PI).max(0.0));
            prev = Some(sol);
        }
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        for i in 0..grid.len() {
            if i > 0 {
                acc += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
            }
            let atom = if grid[i] >= 0.0 { mass0 } else { 0.0 };
            cdf.push(acc + atom);
        }
        Ok(SpectralDensity {
            x: grid.to_vec(),
            density,
            cdf,
            point_mass_at_zero: mass0,
            eps,
        })
    }

    /// Outer bracket of the support: `[a λmin (1-√c)², b λmax (1+√c)²]`,
    /// with the left end set to 0 when `c ≥ 1`.
    pub fn support_bracket(&self) -> (f64, f64) {
        let sc = self.c.sqrt();
        let lower = if self.c < 1.0 {
            self.h2.min() * self.h1.min() * (1.0 - sc).powi(2)
        } else {
            0.0
        };
        (lower, self.h2.max() * self.h1.max() * (1.0 + sc).powi(2))
    }

    /// Locates the hull of the continuous support by a grid scan of the
    /// `ε`-scaling test followed by bisection at both ends.
    pub fn support(&self) -> Result<Support> {
        if self.is_trivial() {
            return Err(Error::Domain("trivial model has no continuous spectrum".into()));
        }
        let (_, right) = self.support_bracket();
        let top = right * 1.05;
        let n = 400;
        let xs: Vec<f64> = (1..=n).map(|k| top * k as f64 / n as f64).collect();
        let mut first = None;
        let mut last = None;
        for (k, &x) in xs.iter().enumerate() {
            if self.is_inside_bulk(x)? {
                first.get_or_insert(k);
                last = Some(k);
            }
        }
        let (Some(first), Some(last)) = (first, last) else {
            return Err(Error::Domain("no continuous spectrum found on the scan grid".into()));
        };
        let bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
            for _ in 0..60 {
                let mid = 0.5 * (inside + outside);
                if self.is_inside_bulk(mid)? {
                    inside = mid;
                } else {
                    outside = mid;
                }
                if (inside - outside).abs() < 1e-12 * inside.abs().max(1e-300) {
                    break;
                }
            }
            Ok(0.5 * (inside + outside))
        };
        let upper = if last + 1 < xs.len() {
            bisect(xs[last], xs[last + 1])?
        } else {
            return Err(Error::Internal("support extends past the outer bracket".into()));
        };
        let lower = if first == 0 { 0.0 } else { bisect(xs[first], xs[first - 1])? };
        Ok(Support {
            lower,
            upper,
            point_mass_at_zero: self.point_mass_at_zero()?,
        })
    }
}

/// Solution at `z̄` from the solution at `z`.
pub fn conjugate(s: &LsdSolution) -> LsdSolution {
    LsdSolution {
        z: s.z.conj(),
        g1: s.g1.conj(),
        g2: s.g2.conj(),
        m: s.m.conj(),
        m_under: s.m_under.conj(),
        ..*s
    }
}

/// Convenience wrapper matching the classical signature.
pub fn solve_lsd(
    c: f64,
    h1: &DiscreteMeasure,
    h2: &DiscreteMeasure,
    z: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<LsdSolution> {
    let model = LsdModel::new(c, h1.clone(), h2.clone())?;
    model.solve(
        z,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

/// Closed-form Marchenko–Pastur Stieltjes transform: the root of
/// `c z m² + (z - 1 + c) m + 1 = 0` with positive imaginary part.
pub fn marchenko_pastur_m(c: f64, z: Complex64) -> Complex64 {
    let a = c * z;
    let b = z - 1.0 + c;
    let disc = (b * b - 4.0 * a).sqrt();
    let r1 = (-b + disc) / (2.0 * a);
    let r2 = (-b - disc) / (2.0 * a);
    if r1.im >= r2.im {
        r1
    } else {
        r2
    }
}
