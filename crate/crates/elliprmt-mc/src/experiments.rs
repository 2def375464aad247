//! The seven experiment runners.
//!
//! Theory is always evaluated at the finite-`n` inputs (`c_n = p/n`, the
//! population ESD and the radius law at `p`); limiting predictions are
//! recorded next to them in `theory.json` where they differ.

use std::sync::Arc;

use elliprmt::covariance::{build_scm, goe_matrix, normalized_scm, SpikeBlocks};
use elliprmt::kernel::{
    cov_m, deterministic_equivalent, eigvec_stat_cov_matrix, kernels_diagonal, reference_integral, Quadrature,
    RectangleContour, TestFunction,
};
use elliprmt::linalg::{sym_eigenvalues, PairSpectrum};
use elliprmt::lsd::LsdModel;
use elliprmt::measure::{radius_law_to_h2, DiscreteMeasure, RadiusLaw};
use elliprmt::sampler::{
    build_population, draw_sample_with, quadform_moment_oracle, quadform_monte_carlo, replicate_rng, BulkRule,
    Population,
};
use elliprmt::spike::{predict, spike_threshold, transition, SpikePrediction};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, PopulationTemplate, ProbeRule, Statistic};
use crate::engine::{run_replicates, to_rows, with_jobs};
use crate::error::{McError, McResult};
use crate::result::{Check, Comparison, ExperimentResult, Records};
use crate::stats::{histogram, ks_standard_normal, moments};

/// Atoms used for the limit of a uniform bulk.
const UNIFORM_LIMIT_ATOMS: usize = 512;

/// Gauss–Legendre nodes per side for the reference-law centering.
const REFERENCE_NODES: usize = 64;

/// Runs an experiment on the current thread pool.
pub fn run(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::SpikeDist => run_spike_dist(cfg),
        ExperimentKind::EigvecOverlap => run_eigvec_overlap(cfg),
        ExperimentKind::BilinearAs => run_bilinear_as(cfg),
        ExperimentKind::BilinearClt => run_bilinear_clt(cfg),
        ExperimentKind::Vesd => run_vesd(cfg),
        ExperimentKind::QuadformOracle => run_quadform_oracle(cfg),
        ExperimentKind::GoeEntries => run_goe_entries(cfg),
    }
}

/// Runs an experiment with at most `jobs` worker threads.
pub fn run_with_jobs(cfg: &ExperimentConfig, jobs: Option<usize>) -> McResult<ExperimentResult> {
    with_jobs(jobs, || run(cfg))?
}

struct Setup {
    pop: Arc<Population>,
    law: RadiusLaw,
    p: usize,
    n: usize,
    seed: u64,
}

fn setup(cfg: &ExperimentConfig, p: usize) -> McResult<Setup> {
    let seed = cfg.seed()?;
    let pop = build_population(&cfg.population.at(p, seed))?;
    Ok(Setup {
        pop: Arc::new(pop),
        law: cfg.radius.at(p)?,
        p,
        n: cfg.n_for(p),
        seed,
    })
}

impl Setup {
    /// LSD model at the finite inputs; `nonspiked` zeroes the spikes in `H1`.
    fn model(&self, nonspiked: bool) -> McResult<LsdModel> {
        let h1 = if nonspiked { self.pop.h1_nonspiked()? } else { self.pop.h1()? };
        Ok(LsdModel::new(self.p as f64 / self.n as f64, h1, radius_law_to_h2(&self.law)?)?)
    }

    fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> McResult<elliprmt::sampler::EllipticalSample> {
        Ok(draw_sample_with(&self.pop, &self.law, self.n, self.seed, rng)?)
    }
}

fn limit_h1(t: &PopulationTemplate) -> McResult<DiscreteMeasure> {
    Ok(match &t.bulk {
        BulkRule::Constant { value } => DiscreteMeasure::dirac(*value),
        BulkRule::Uniform { .. } => {
            let m = UNIFORM_LIMIT_ATOMS as f64;
            let atoms: Vec<f64> = (0..UNIFORM_LIMIT_ATOMS).map(|i| (i as f64 + 0.5) / m).collect();
            DiscreteMeasure::uniform(&atoms)?
        }
        BulkRule::Explicit { values } => DiscreteMeasure::uniform(values)?,
    })
}

fn limit_model(cfg: &ExperimentConfig, p: usize) -> McResult<LsdModel> {
    Ok(LsdModel::new(cfg.ratio(), limit_h1(&cfg.population)?, cfg.radius.limit_h2(p)?)?)
}

fn unit(p: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(p, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// Seeded orthonormal pair, drawn from a stream no replicate uses.
fn random_orthonormal_pair(p: usize, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let mut rng = replicate_rng(seed, u64::MAX - 1);
    let mut gauss = || DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = gauss().normalize();
    let b = gauss();
    let b = (&b - &a * a.dot(&b)).normalize();
    (a, b)
}

/// Bilinear forms `(π_a, π_b)` for the probe rule.
fn forms(rule: ProbeRule, p: usize, seed: u64) -> McResult<Vec<(DVector<f64>, DVector<f64>)>> {
    Ok(match rule {
        ProbeRule::SameBasis => vec![(unit(p, 0), unit(p, 0))],
        ProbeRule::OrthogonalBasis => vec![(unit(p, 0), unit(p, 0)), (unit(p, 1), unit(p, 1))],
        ProbeRule::RandomOrthogonal => {
            let (a, b) = random_orthonormal_pair(p, seed);
            vec![(a, b)]
        }
    })
}

/// Rejects spectral arguments within `margin` of the limiting support.
fn check_z(model: &LsdModel, z: Complex64, margin: f64) -> McResult<()> {
    let s = model.support()?;
    let dx = if z.re < s.lower {
        s.lower - z.re
    } else if z.re > s.upper {
        z.re - s.upper
    } else {
        0.0
    };
    let mut dist = dx.hypot(z.im);
    if s.point_mass_at_zero > 0.0 {
        dist = dist.min(z.norm());
    }
    if dist <= margin {
        return Err(McError::Config(format!(
            "z = {z} lies within {margin} of the support [{}, {}]",
            s.lower, s.upper
        )));
    }
    Ok(())
}

fn se_of_variance(xs: &[f64]) -> f64 {
    let m = moments(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m.mean) * (x - m.mean)).collect();
    moments(&sq).se
}

fn spike_dist_columns(k: usize) -> Vec<String> {
    (1..=k).flat_map(|i| [format!("lambda_{i}"), format!("std_{i}")]).collect()
}

fn run_spike_dist(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let s = setup(cfg, cfg.p)?;
    let model = s.model(true)?;
    let k = s.pop.k();
    let spikes = s.pop.spec.spikes.clone();
    let preds: Vec<SpikePrediction> = spikes.iter().map(|&a| predict(&model, a)).collect::<Result<_, _>>()?;
    let limit = limit_model(cfg, cfg.p)?;
    let limit_preds: Vec<Option<SpikePrediction>> = spikes.iter().map(|&a| predict(&limit, a).ok()).collect();
    let nf = s.n as f64;
    let p = s.p;
    let res = run_replicates(cfg.reps, 0, s.seed, |_, rng| {
        let sample = s.draw(rng)?;
        let ev = sym_eigenvalues(&normalized_scm(&sample));
        Ok((0..k)
            .flat_map(|i| {
                let l = ev[p - 1 - i];
                let pr = &preds[i];
                [l, nf.sqrt() * (l / pr.theta - 1.0) / pr.sigma_delta_sq.sqrt()]
            })
            .collect())
    });
    let mut records = Records::new(spike_dist_columns(k));
    records.rows = to_rows(res, 0);

    let th = &cfg.thresholds;
    let mut comparisons = Vec::new();
    let mut checks = Vec::new();
    for (i, pr) in preds.iter().enumerate() {
        let j = i + 1;
        let lam = records.column(&format!("lambda_{j}"));
        let std = records.column(&format!("std_{j}"));
        let m = moments(&lam);
        let sd = pr.theta * pr.sigma_delta_sq.sqrt();
        let mean_cmp = Comparison::new(format!("mean_lambda_{j}"), m.mean, pr.theta, sd / (nf * m.count as f64).sqrt());
        checks.push(Check::at_most(format!("mean_lambda_{j}_abs_z"), mean_cmp.z_score.abs(), th.z_max));
        comparisons.push(mean_cmp);
        comparisons.push(Comparison::new(format!("var_lambda_{j}"), m.variance, sd * sd / nf, se_of_variance(&lam)));
        let v = moments(&std);
        checks.push(Check::within(format!("var_ratio_{j}"), v.variance, Some(th.var_ratio_lo), Some(th.var_ratio_hi)));
        checks.push(Check::at_most(format!("ks_{j}"), ks_standard_normal(&std), th.ks_max));
    }
    let lam1 = records.column("lambda_1");
    let sd1 = preds[0].theta * preds[0].sigma_delta_sq.sqrt() / nf.sqrt();
    let hist = histogram(&lam1, cfg.hist_bins, Some((preds[0].theta, sd1)));
    let theory = json!({
        "c": model.c,
        "threshold": spike_threshold(&model).ok(),
        "spikes": preds,
        "lambda_variance": preds.iter().map(|p| p.theta * p.theta * p.sigma_delta_sq / nf).collect::<Vec<_>>(),
        "gaussian_overlay": {"mean": preds[0].theta, "sd": sd1},
        "limit": limit_preds,
    });
    ExperimentResult::assemble(cfg, records, comparisons, checks, s.pop.warnings.clone(), theory, Some(hist), vec![])
}

fn run_eigvec_overlap(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let dims = cfg.dimensions();
    let k = cfg.population.spikes.len();
    let mut columns = vec!["p".to_string()];
    columns.extend((1..=k).map(|i| format!("overlap_sq_{i}")));
    columns.extend((1..=k).map(|i| format!("sign_{i}")));
    let mut records = Records::new(columns);
    let mut comparisons = Vec::new();
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut theory_rows = Vec::new();
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["p", "spike", "mean", "se", "theory", "light_tail_theory"])?;
    let th = &cfg.thresholds;
    for (gi, &p) in dims.iter().enumerate() {
        let s = setup(cfg, p)?;
        warnings.extend(s.pop.warnings.iter().map(|w| format!("p = {p}: {w}")));
        let model = s.model(true)?;
        let light = LsdModel::new(model.c, model.h1.clone(), DiscreteMeasure::dirac(1.0))?;
        let spikes = &s.pop.spec.spikes;
        let preds: Vec<SpikePrediction> = spikes.iter().map(|&a| predict(&model, a)).collect::<Result<_, _>>()?;
        let light_preds: Vec<SpikePrediction> =
            spikes.iter().map(|&a| predict(&light, a)).collect::<Result<_, _>>()?;
        let offset = gi * cfg.reps;
        let res = run_replicates(cfg.reps, offset, s.seed, |_, rng| {
            let sample = s.draw(rng)?;
            let bundle = build_scm(&sample)?;
            let mut ov = Vec::with_capacity(2 * k);
            let mut sg = Vec::with_capacity(k);
            for i in 0..k {
                let d = bundle.eigenvectors.column(p - 1 - i).dot(&s.pop.u0.column(i));
                ov.push(d * d);
                sg.push(if d >= 0.0 { 1.0 } else { -1.0 });
            }
            let mut out = vec![p as f64];
            out.extend(ov);
            out.extend(sg);
            Ok(out)
        });
        records.rows.extend(to_rows(res, offset));
        let sub = records.filtered("p", p as f64);
        for i in 0..k {
            let j = i + 1;
            let m = moments(&sub.column(&format!("overlap_sq_{j}")));
            let own = Comparison::new(format!("overlap_sq_{j}_p{p}"), m.mean, preds[i].overlap_sq, m.se);
            let lt = Comparison::new(
                format!("overlap_sq_{j}_p{p}_vs_light_tail"),
                m.mean,
                light_preds[i].overlap_sq,
                m.se,
            );
            checks.push(Check::at_most(
                format!("overlap_sq_{j}_p{p}_abs_err"),
                (m.mean - preds[i].overlap_sq).abs(),
                th.overlap_abs,
            ));
            if !cfg.radius.nu.is_light_tail() {
                checks.push(Check::at_least(
                    format!("overlap_sq_{j}_p{p}_light_tail_abs_z"),
                    lt.z_score.abs(),
                    th.z_max,
                ));
            }
            table.write_record(&[
                p.to_string(),
                j.to_string(),
                m.mean.to_string(),
                m.se.to_string(),
                preds[i].overlap_sq.to_string(),
                light_preds[i].overlap_sq.to_string(),
            ])?;
            comparisons.push(own);
            comparisons.push(lt);
        }
        theory_rows.push(json!({"p": p, "n": s.n, "spikes": preds, "light_tail": light_preds}));
    }
    let table = table.into_inner().map_err(|e| McError::Serialize(e.to_string()))?;
    let theory = json!({ "grid": theory_rows });
    ExperimentResult::assemble(cfg, records, comparisons, checks, warnings, theory, None, vec![("overlap.csv".into(), table)])
}

/// Deterministic equivalents per form and spectral argument.
fn equivalents(
    model: &LsdModel,
    pop: &Population,
    forms: &[(DVector<f64>, DVector<f64>)],
    zs: &[Complex64],
    margin: f64,
) -> McResult<Vec<Vec<Complex64>>> {
    let sigma = pop.spectrum();
    for &z in zs {
        check_z(model, z, margin)?;
    }
    let g2: Vec<Complex64> = zs.iter().map(|&z| model.solve_any(z).map(|s| s.g2)).collect::<Result<_, _>>()?;
    forms
        .iter()
        .map(|(a, b)| {
            let ps = PairSpectrum::new(&sigma, a, b)?;
            zs.iter()
                .zip(&g2)
                .map(|(&z, &g)| Ok(deterministic_equivalent(&ps, z, g)?))
                .collect()
        })
        .collect()
}

fn run_bilinear_as(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let s = setup(cfg, cfg.p)?;
    let model = s.model(false)?;
    let fs = forms(cfg.probes, s.p, s.seed)?;
    let zs = cfg.z_values();
    let deq = equivalents(&model, &s.pop, &fs, &zs, cfg.z_margin)?;
    let columns = (0..fs.len())
        .flat_map(|f| (0..zs.len()).map(move |zi| format!("dev_f{}_z{}", f + 1, zi + 1)))
        .collect();
    let res = run_replicates(cfg.reps, 0, s.seed, |_, rng| {
        let bundle = build_scm(&s.draw(rng)?)?;
        let mut out = Vec::new();
        for (f, (a, b)) in fs.iter().enumerate() {
            let probe = bundle.probe(a, b)?;
            for (zi, &z) in zs.iter().enumerate() {
                out.push((probe.eval(z)? - deq[f][zi]).norm());
            }
        }
        Ok(out)
    });
    let mut records = Records::new(columns);
    records.rows = to_rows(res, 0);
    let mut comparisons = Vec::new();
    let mut worst: f64 = 0.0;
    for c in records.columns.clone() {
        let m = moments(&records.column(&c));
        worst = worst.max(m.mean);
        comparisons.push(Comparison::new(format!("mean_{c}"), m.mean, 0.0, m.se));
    }
    let checks = vec![Check::at_most("max_mean_deviation", worst, cfg.thresholds.deviation_max)];
    let theory = json!({
        "c": model.c,
        "z_points": cfg.z_points,
        "deterministic_equivalent": deq.iter().map(|row| row.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    ExperimentResult::assemble(cfg, records, comparisons, checks, s.pop.warnings.clone(), theory, None, vec![])
}

fn run_bilinear_clt(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let s = setup(cfg, cfg.p)?;
    let model = s.model(false)?;
    let fs = forms(cfg.probes, s.p, s.seed)?;
    let zs = cfg.z_values();
    let deq = equivalents(&model, &s.pop, &fs, &zs, cfg.z_margin)?;
    let nf = fs.len();
    let columns = (0..zs.len())
        .flat_map(|zi| {
            (0..nf).flat_map(move |f| [format!("re_f{}_z{}", f + 1, zi + 1), format!("im_f{}_z{}", f + 1, zi + 1)])
        })
        .collect();
    let sp = (s.p as f64).sqrt();
    let res = run_replicates(cfg.reps, 0, s.seed, |_, rng| {
        let bundle = build_scm(&s.draw(rng)?)?;
        let probes = fs.iter().map(|(a, b)| bundle.probe(a, b)).collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::new();
        for (zi, &z) in zs.iter().enumerate() {
            for (f, probe) in probes.iter().enumerate() {
                let m = (probe.eval(z)? - deq[f][zi]) * sp;
                out.push(m.re);
                out.push(m.im);
            }
        }
        Ok(out)
    });
    let mut records = Records::new(columns);
    records.rows = to_rows(res, 0);

    let sigma = s.pop.spectrum();
    let th = &cfg.thresholds;
    let mut comparisons = Vec::new();
    let mut checks = Vec::new();
    let mut theory_rows = Vec::new();
    for (zi, &z) in zs.iter().enumerate() {
        let zl = zi + 1;
        let series: Vec<Vec<Complex64>> = (1..=nf)
            .map(|f| {
                let re = records.column(&format!("re_f{f}_z{zl}"));
                let im = records.column(&format!("im_f{f}_z{zl}"));
                re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect()
            })
            .collect();
        let centered: Vec<Vec<Complex64>> = series
            .iter()
            .map(|v| {
                let m: Complex64 = v.iter().sum::<Complex64>() / v.len().max(1) as f64;
                v.iter().map(|x| x - m).collect()
            })
            .collect();
        let count = series[0].len();
        let denom = (count.max(2) - 1) as f64;
        let mut row = serde_json::Map::new();
        for f in 0..nf {
            let fl = f + 1;
            for (part, pick) in [("re", 0usize), ("im", 1)] {
                let xs: Vec<f64> = series[f].iter().map(|v| if pick == 0 { v.re } else { v.im }).collect();
                let m = moments(&xs);
                let cmp = Comparison::new(format!("mean_{part}_f{fl}_z{zl}"), m.mean, 0.0, m.se);
                checks.push(Check::at_most(format!("mean_{part}_f{fl}_z{zl}_abs_z"), cmp.z_score.abs(), th.z_max));
                comparisons.push(cmp);
            }
            let (a, b) = &fs[f];
            let var_th = cov_m(&model, &sigma, [a, b, a, b], z, z.conj())?;
            let abs2: Vec<f64> = centered[f].iter().map(|v| v.norm_sqr()).collect();
            let var_emp = abs2.iter().sum::<f64>() / denom;
            let cmp = Comparison::new(format!("var_f{fl}_z{zl}"), var_emp, var_th.re, moments(&abs2).se);
            checks.push(Check::at_most(
                format!("var_f{fl}_z{zl}_rel_err"),
                (var_emp - var_th.re).abs() / var_th.re.abs(),
                th.var_rel_tol,
            ));
            comparisons.push(cmp);
            let pseudo_th = cov_m(&model, &sigma, [a, b, a, b], z, z)?;
            let sq: Vec<Complex64> = centered[f].iter().map(|v| v * v).collect();
            let pseudo: Complex64 = sq.iter().sum::<Complex64>() / denom;
            let re: Vec<f64> = sq.iter().map(|v| v.re).collect();
            let im: Vec<f64> = sq.iter().map(|v| v.im).collect();
            comparisons.push(Comparison::new(format!("pseudo_var_re_f{fl}_z{zl}"), pseudo.re, pseudo_th.re, moments(&re).se));
            comparisons.push(Comparison::new(format!("pseudo_var_im_f{fl}_z{zl}"), pseudo.im, pseudo_th.im, moments(&im).se));
            row.insert(format!("var_f{fl}"), json!(var_th.re));
            row.insert(format!("pseudo_var_f{fl}"), json!([pseudo_th.re, pseudo_th.im]));
        }
        if nf == 2 {
            let (a1, b1) = &fs[0];
            let (a2, b2) = &fs[1];
            let cov_th = cov_m(&model, &sigma, [a1, b1, a2, b2], z, z.conj())?;
            let prod: Vec<Complex64> = centered[0].iter().zip(&centered[1]).map(|(x, y)| x * y.conj()).collect();
            let emp: Complex64 = prod.iter().sum::<Complex64>() / denom;
            for (part, e, t, xs) in [
                ("re", emp.re, cov_th.re, prod.iter().map(|v| v.re).collect::<Vec<_>>()),
                ("im", emp.im, cov_th.im, prod.iter().map(|v| v.im).collect::<Vec<_>>()),
            ] {
                let cmp = Comparison::new(format!("cov_{part}_z{zl}"), e, t, moments(&xs).se);
                checks.push(Check::at_most(format!("cov_{part}_z{zl}_abs_z"), cmp.z_score.abs(), th.z_max));
                comparisons.push(cmp);
            }
            row.insert("cov_f1_f2".into(), json!([cov_th.re, cov_th.im]));
        }
        row.insert("z".into(), json!([z.re, z.im]));
        theory_rows.push(serde_json::Value::Object(row));
    }
    let theory = json!({ "c": model.c, "points": theory_rows });
    ExperimentResult::assemble(cfg, records, comparisons, checks, s.pop.warnings.clone(), theory, None, vec![])
}

fn run_goe_entries(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let s = setup(cfg, cfg.p)?;
    let model = s.model(true)?;
    let z = match cfg.z_points.first() {
        Some(&[re, im]) => {
            if im != 0.0 {
                return Err(McError::Config("goe-entries needs a real z".into()));
            }
            re
        }
        None => transition(&model, s.pop.spec.spikes[0])?.z.re,
    };
    let g2 = model.solve_real(z)?.g2.re;
    let diag = kernels_diagonal(&model, Complex64::new(z, 0.0))?;
    let (s11, s12) = (diag.sigma11_sq.re, diag.sigma12_sq.re);
    let p = s.p;
    let res = run_replicates(cfg.reps, 0, s.seed, |_, rng| {
        let blocks = SpikeBlocks::new(&s.draw(rng)?)?;
        let o = goe_matrix(&blocks, p, z, g2)?;
        Ok(vec![o[(0, 0)], o[(0, 1)], o[(1, 1)]])
    });
    let mut records = Records::new(vec!["o11".into(), "o12".into(), "o22".into()]);
    records.rows = to_rows(res, 0);
    let th = &cfg.thresholds;
    let o11 = records.column("o11");
    let o12 = records.column("o12");
    let o22 = records.column("o22");
    let (m11, m12, m22) = (moments(&o11), moments(&o12), moments(&o22));
    let prod: Vec<f64> = o11.iter().zip(&o12).map(|(a, b)| (a - m11.mean) * (b - m12.mean)).collect();
    let cov = prod.iter().sum::<f64>() / (prod.len().max(2) - 1) as f64;
    let cov_cmp = Comparison::new("cov_o11_o12", cov, 0.0, moments(&prod).se);
    let checks = vec![
        Check::within("var_ratio_o11", m11.variance / s11, Some(th.var_ratio_lo), Some(th.var_ratio_hi)),
        Check::within("var_ratio_o12", m12.variance / s12, Some(th.var_ratio_lo), Some(th.var_ratio_hi)),
        Check::at_most("cov_o11_o12_abs_z", cov_cmp.z_score.abs(), th.z_max),
    ];
    let comparisons = vec![
        Comparison::new("var_o11", m11.variance, s11, se_of_variance(&o11)),
        Comparison::new("var_o12", m12.variance, s12, se_of_variance(&o12)),
        Comparison::new("var_o22", m22.variance, s11, se_of_variance(&o22)),
        cov_cmp,
        Comparison::new("mean_o11", m11.mean, 0.0, m11.se),
        Comparison::new("mean_o12", m12.mean, 0.0, m12.se),
    ];
    let theory = json!({"z": z, "g2": g2, "sigma11_sq": s11, "sigma12_sq": s12, "kernels": diag});
    ExperimentResult::assemble(cfg, records, comparisons, checks, s.pop.warnings.clone(), theory, None, vec![])
}

fn run_vesd(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let s = setup(cfg, cfg.p)?;
    let model = s.model(false)?;
    let sigma = s.pop.spectrum();
    let pi = forms(cfg.probes, s.p, s.seed)?.remove(0).0;
    let ps = PairSpectrum::new(&sigma, &pi, &pi)?;
    let contour = RectangleContour::around(&model)?;
    let gl = RectangleContour { quadrature: Quadrature::GaussLegendre, ..contour };
    let stats = cfg.statistics.clone();
    let reference: Vec<f64> = stats
        .iter()
        .map(|&st| match st {
            Statistic::One => Ok(1.0),
            _ => reference_integral(&model, &ps, move |z| st.eval_c(z), &gl, REFERENCE_NODES),
        })
        .collect::<Result<_, _>>()?;
    let sp = (s.p as f64).sqrt();
    let res = run_replicates(cfg.reps, 0, s.seed, |_, rng| {
        let bundle = build_scm(&s.draw(rng)?)?;
        let w = bundle.vesd_weights(&pi)?;
        Ok(stats
            .iter()
            .zip(&reference)
            .map(|(st, r)| {
                let v: f64 = w.iter().zip(&bundle.eigenvalues).map(|(wi, &l)| wi * st.eval(l)).sum();
                sp * (v - r)
            })
            .collect())
    });
    let mut records = Records::new(stats.iter().map(|s| format!("stat_{}", s.label())).collect());
    records.rows = to_rows(res, 0);

    let fns: Vec<Box<TestFunction<'static>>> =
        stats.iter().map(|&st| Box::new(move |z| st.eval_c(z)) as Box<TestFunction<'static>>).collect();
    let refs: Vec<&TestFunction<'_>> = fns.iter().map(|b| b.as_ref()).collect();
    let cov = eigvec_stat_cov_matrix(&model, &sigma, &pi, &refs, &contour, cfg.quad_nodes)?;
    let cov2 = eigvec_stat_cov_matrix(&model, &sigma, &pi, &refs, &contour, 2 * cfg.quad_nodes)?;
    let th = &cfg.thresholds;
    let mut comparisons = Vec::new();
    let mut checks = Vec::new();
    for (i, st) in stats.iter().enumerate() {
        let name = st.label();
        let xs = records.column(&format!("stat_{name}"));
        let m = moments(&xs);
        if *st == Statistic::One {
            let worst = xs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            checks.push(Check::at_most("stat_one_max_abs", worst, 1e-10));
            continue;
        }
        let mean_cmp = Comparison::new(format!("mean_{name}"), m.mean, 0.0, m.se);
        checks.push(Check::at_most(format!("mean_{name}_abs_z"), mean_cmp.z_score.abs(), th.z_max));
        comparisons.push(mean_cmp);
        comparisons.push(Comparison::new(format!("var_{name}"), m.variance, cov[i][i], se_of_variance(&xs)));
        checks.push(Check::at_most(
            format!("var_{name}_rel_err"),
            (m.variance - cov[i][i]).abs() / cov[i][i].abs(),
            th.var_rel_tol,
        ));
        checks.push(Check::at_most(
            format!("quadrature_{name}_self_convergence"),
            (cov[i][i] - cov2[i][i]).abs() / cov2[i][i].abs(),
            th.self_convergence,
        ));
    }
    // Closed-form moments of the reference law for cross-checking.
    let s1: f64 = ps.iter().map(|(l, w)| w * l).sum();
    let s2: f64 = ps.iter().map(|(l, w)| w * l * l).sum();
    let (ey, ey2) = (model.h2.mean(), model.h2.second_moment());
    let closed = json!({
        "x": ey * s1,
        "x2": model.c * model.h1.mean() * ey2 * s1 + ey * ey * s2,
    });
    let mut warnings = s.pop.warnings.clone();
    let mut tables = Vec::new();
    match reference_cdf_table(&model, &ps, &contour) {
        Ok(bytes) => tables.push(("reference_cdf.csv".to_string(), bytes)),
        Err(e) => warnings.push(format!("reference CDF not written: {e}")),
    }
    let theory = json!({
        "c": model.c,
        "statistics": stats,
        "reference_integrals": reference,
        "reference_moments_closed_form": closed,
        "covariance": cov,
        "covariance_doubled_nodes": cov2,
        "contour": contour,
    });
    ExperimentResult::assemble(cfg, records, comparisons, checks, warnings, theory, None, tables)
}

fn reference_cdf_table(model: &LsdModel, ps: &PairSpectrum, contour: &RectangleContour) -> McResult<Vec<u8>> {
    let lo = contour.x_left.max(0.0);
    let hi = contour.x_right;
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let dens = model.stieltjes_invert_with(&grid, 1e-3, |sol| {
        deterministic_equivalent(ps, sol.z, sol.g2).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    })?;
    let mut buf = Vec::new();
    dens.to_csv_writer(&mut buf)?;
    Ok(buf)
}

fn random_symmetric<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

fn run_quadform_oracle(cfg: &ExperimentConfig) -> McResult<ExperimentResult> {
    let seed = cfg.seed()?;
    let p = cfg.p;
    let draws = cfg.draws;
    let res = run_replicates(cfg.reps, 0, seed, |_, rng| {
        let a = random_symmetric(p, rng);
        let b = random_symmetric(p, rng);
        let exact = quadform_moment_oracle(&a, &b)?;
        let (est, se) = quadform_monte_carlo(&a, &b, draws, rng);
        Ok(vec![exact, est, se, crate::stats::z_score(est, exact, se)])
    });
    let mut records = Records::new(vec!["exact".into(), "estimate".into(), "se".into(), "z".into()]);
    records.rows = to_rows(res, 0);
    let zmax = records.column("z").iter().fold(0.0f64, |a, z| a.max(z.abs()));
    let comparisons = records
        .rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| Comparison::new(format!("pair_{}", r.replicate), r.values[1], r.values[0], r.values[2]))
        .collect();
    let checks = vec![Check::at_most("max_abs_z", zmax, cfg.thresholds.oracle_z_max)];
    let theory = json!({"dimension": p, "draws": draws, "pairs": cfg.reps});
    ExperimentResult::assemble(cfg, records, comparisons, checks, vec![], theory, None, vec![])
}
