//! Cross-module checks: sampled spectra against the limiting theory.

use std::sync::Arc;

use elliprmt::covariance::build_scm;
use elliprmt::measure::{radius_law_to_h2, NuRule, RadiusKind, RadiusLaw};
use elliprmt::{build_population, draw_sample, predict, LsdModel, PopulationSpec};
use num_complex::Complex64;

fn empirical_stieltjes(eigs: &[f64], z: Complex64) -> Complex64 {
    eigs.iter().map(|&l| 1.0 / (l - z)).sum::<Complex64>() / eigs.len() as f64
}

#[test]
fn sampled_stieltjes_transform_matches_limit() {
    let (p, n) = (200, 400);
    let pop = Arc::new(build_population(&PopulationSpec::identity(p)).unwrap());
    let z = Complex64::new(1.0, 1.0);
    for rule in [NuRule::Zero, NuRule::PSquared] {
        let kind = if rule == NuRule::Zero { RadiusKind::Deterministic } else { RadiusKind::TwoPoint };
        let law = RadiusLaw::from_rule(kind, p, rule).unwrap();
        let model = LsdModel::new(0.5, pop.h1().unwrap(), radius_law_to_h2(&law).unwrap()).unwrap();
        let limit = model.solve_any(z).unwrap().m;
        let mut avg = Complex64::new(0.0, 0.0);
        for seed in 0..4 {
            let scm = build_scm(&draw_sample(&pop, &law, n, seed).unwrap()).unwrap();
            avg += empirical_stieltjes(&scm.eigenvalues, z) / 4.0;
        }
        assert!((avg - limit).norm() < 0.01, "{rule:?}: {avg} vs {limit}");
    }
}

#[test]
fn two_point_radius_halves_the_effective_sample() {
    // ν = p² puts ρ² at 0 or 2p, so H2 = ½δ0 + ½δ√2: Marchenko–Pastur with
    // ratio 2c on half the columns, scaled by 1/√2.
    let law = RadiusLaw::from_rule(RadiusKind::TwoPoint, 100, NuRule::PSquared).unwrap();
    let h2 = radius_law_to_h2(&law).unwrap();
    let heavy = LsdModel::new(0.5, elliprmt::DiscreteMeasure::dirac(1.0), h2).unwrap();
    let s = heavy.support().unwrap();
    assert!((s.upper - 2.0 * 2f64.sqrt()).abs() < 1e-8, "{}", s.upper);
    assert!(s.lower.abs() < 1e-8, "{}", s.lower);
    assert!(s.point_mass_at_zero < 1e-6);

    let grid: Vec<f64> = (0..=2000).map(|i| s.upper * 1.05 * i as f64 / 2000.0).collect();
    let d = heavy.stieltjes_invert(&grid, 1e-4).unwrap();
    let total = *d.cdf.last().unwrap();
    assert!((total - 1.0).abs() < 5e-3, "mass {total}");
}

#[test]
fn top_sample_eigenvalue_tracks_the_outlier() {
    let (p, n) = (200, 400);
    let spec = PopulationSpec { spikes: vec![8.0], toeplitz_rho: 0.0, ..PopulationSpec::identity(p) };
    let pop = Arc::new(build_population(&spec).unwrap());
    let law = RadiusLaw::from_rule(RadiusKind::Deterministic, p, NuRule::Zero).unwrap();
    let theta = predict(&LsdModel::marchenko_pastur(0.5).unwrap(), 8.0).unwrap().theta;
    let mut mean = 0.0;
    for seed in 0..5 {
        let scm = build_scm(&draw_sample(&pop, &law, n, seed).unwrap()).unwrap();
        mean += scm.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max) / 5.0;
    }
    // The standard deviation of one draw is θ σ_Δ / √n ≈ 0.56.
    assert!((mean - theta).abs() < 0.6, "{mean} vs {theta}");
}
