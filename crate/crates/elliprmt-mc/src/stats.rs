//! Summary statistics reduced in a fixed order.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
}

/// Moments of the finite values, summed in order.
pub fn moments(xs: &[f64]) -> Moments {
    let v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    let n = v.len();
    if n == 0 {
        return Moments { count: 0, mean: f64::NAN, variance: f64::NAN, se: f64::NAN };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        f64::NAN
    };
    Moments { count: n, mean, variance, se: (variance / n as f64).sqrt() }
}

/// Kolmogorov–Smirnov distance between the sample and the standard normal.
pub fn ks_standard_normal(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = normal.cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// One histogram bin with the overlaid Gaussian density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    pub gauss_density: f64,
}

/// Equal-width histogram over the sample range; counts add up to the number
/// of finite values. `gauss` gives the overlay's mean and standard deviation.
pub fn histogram(xs: &[f64], bins: usize, gauss: Option<(f64, f64)>) -> Vec<Bin> {
    let v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &v {
        let k = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let density = |x: f64| match gauss {
        Some((m, s)) if s > 0.0 => {
            (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        }
        _ => f64::NAN,
    };
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let l = lo + k as f64 * width;
            let r = if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width };
            Bin { bin_left: l, bin_right: r, count, gauss_density: density(0.5 * (l + r)) }
        })
        .collect()
}

/// `(empirical − theory)/se`, or NaN when the error is not positive.
pub fn z_score(empirical: f64, theory: f64, se: f64) -> f64 {
    if se > 0.0 {
        (empirical - theory) / se
    } else {
        f64::NAN
    }
}
