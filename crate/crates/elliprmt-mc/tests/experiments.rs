//! Small runs of every experiment kind and the output-directory contract.

use elliprmt_mc::result::sha256_hex;
use elliprmt_mc::{run, run_with_jobs, ExperimentConfig, ExperimentKind, Records};

fn small(kind: &str, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{"kind":"{kind}","p":30,"n":60,"reps":24,"seed":11,
            "radius":{{"kind":"two-point","nu":"p2"}}{extra}}}"#
    );
    ExperimentConfig::from_json(&text).unwrap()
}

fn configs() -> Vec<ExperimentConfig> {
    vec![
        small("spike-dist", r#","population":{"spikes":[8.0],"bulk":{"kind":"uniform"}},"hist_bins":6"#),
        small("eigvec-overlap", r#","population":{"spikes":[8.0]},"grid":[30,40]"#),
        small("bilinear-as", r#","z_points":[[1.0,1.0]]"#),
        small("bilinear-clt", r#","z_points":[[1.5,1.0]],"probes":"orthogonal-basis""#),
        small("goe-entries", r#","population":{"spikes":[8.0,5.0]}"#),
        small("vesd", r#","population":{"toeplitz_rho":0.0},"quad_nodes":40"#),
        ExperimentConfig::from_json(
            r#"{"kind":"quadform-oracle","p":6,"n":6,"reps":2,"seed":3,"draws":20000,
                "radius":{"kind":"deterministic","nu":"0"}}"#,
        )
        .unwrap(),
    ]
}

#[test]
fn every_kind_runs_and_writes_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in configs() {
        let r = run(&cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.kind.name()));
        assert_eq!(r.summary.failures, 0, "{}: {:?}", cfg.kind.name(), r.summary.warnings);
        assert!(!r.summary.checks.is_empty(), "{} has no checks", cfg.kind.name());
        let out = dir.path().join(cfg.kind.name());
        r.write_to(&out).unwrap();
        for f in ["records.csv", "summary.json", "theory.json", "config.json"] {
            assert!(out.join(f).is_file(), "{}: missing {f}", cfg.kind.name());
        }
        let bytes = std::fs::read(out.join("records.csv")).unwrap();
        assert_eq!(sha256_hex(&bytes), r.summary.records_sha256);
        let parsed = Records::from_csv_bytes(&bytes).unwrap();
        assert_eq!(parsed.columns, r.records.columns);
        assert_eq!(parsed.rows.len(), r.summary.records);

        let saved = ExperimentConfig::from_json(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
        assert_eq!(saved, cfg);
        match cfg.kind {
            ExperimentKind::SpikeDist => {
                let hist = std::fs::read_to_string(out.join("hist.csv")).unwrap();
                let mut lines = hist.lines();
                assert_eq!(lines.next().unwrap(), "bin_left,bin_right,count,gauss_density");
                let total: usize = lines.map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap()).sum();
                assert_eq!(total, cfg.reps);
            }
            ExperimentKind::EigvecOverlap => {
                let table = std::fs::read_to_string(out.join("overlap.csv")).unwrap();
                assert_eq!(table.lines().count(), 1 + cfg.grid.len());
                assert_eq!(r.summary.records, cfg.reps * cfg.grid.len());
            }
            ExperimentKind::Vesd => assert!(out.join("reference_cdf.csv").is_file()),
            _ => {}
        }
    }
}

#[test]
fn summaries_recompute_from_records() {
    let cfg = small("spike-dist", r#","population":{"spikes":[8.0],"bulk":{"kind":"uniform"}}"#);
    let r = run(&cfg).unwrap();
    let parsed = Records::from_csv_bytes(&r.records.to_csv_bytes().unwrap()).unwrap();
    let recomputed = parsed.column_moments();
    assert_eq!(recomputed.len(), r.summary.columns.len());
    for (name, m) in &r.summary.columns {
        let again = &recomputed[name];
        assert!((again.mean - m.mean).abs() <= 1e-12 * m.mean.abs().max(1.0), "{name}");
        assert!((again.variance - m.variance).abs() <= 1e-10 * m.variance.abs().max(1.0), "{name}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    for cfg in configs().into_iter().filter(|c| c.kind != ExperimentKind::QuadformOracle) {
        let a = run_with_jobs(&cfg, Some(1)).unwrap();
        let b = run_with_jobs(&cfg, Some(3)).unwrap();
        assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap(), "{}", cfg.kind.name());
        assert_eq!(a.records.to_csv_bytes().unwrap(), b.records.to_csv_bytes().unwrap());
    }
}

#[test]
fn seed_changes_the_draws() {
    let mut cfg = small("bilinear-as", r#","z_points":[[1.0,1.0]]"#);
    let a = run(&cfg).unwrap();
    cfg.seed = Some(12);
    let b = run(&cfg).unwrap();
    assert_ne!(a.summary.records_sha256, b.summary.records_sha256);
}

#[test]
fn bad_configs_are_rejected() {
    let err = ExperimentConfig::from_json(
        r#"{"kind":"vesd","p":30,"n":60,"reps":2,"radius":{"kind":"gamma","nu":"p"},"bogus":1}"#,
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("bogus"), "{err}");
    let cfg = small("bilinear-as", r#","z_points":[[1.0,0.0]]"#);
    assert!(run(&cfg).is_err(), "z on the support must be rejected");
}
