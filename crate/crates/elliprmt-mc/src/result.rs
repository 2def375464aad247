//! Replicate records, summaries and their on-disk layout.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::McResult;
use crate::stats::{moments, Bin, Moments};

/// One replicate; `error` is set and `values` empty when it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub replicate: usize,
    pub values: Vec<f64>,
    pub error: Option<String>,
}

/// Per-replicate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Records {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Records {
    /// Empty table with the given value columns.
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    /// Values of a column over successful replicates, in replicate order.
    pub fn column(&self, name: &str) -> Vec<f64> {
        match self.columns.iter().position(|c| c == name) {
            Some(i) => self.rows.iter().filter(|r| r.error.is_none()).map(|r| r.values[i]).collect(),
            None => Vec::new(),
        }
    }

    /// Rows whose `key` column equals `value`.
    pub fn filtered(&self, key: &str, value: f64) -> Records {
        let Some(i) = self.columns.iter().position(|c| c == key) else {
            return Records::new(self.columns.clone());
        };
        Records {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.error.is_none() && r.values[i] == value)
                .cloned()
                .collect(),
        }
    }

    /// Number of failed replicates.
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV text: `replicate,status,<columns>`; failed rows leave values empty.
    pub fn to_csv_bytes(&self) -> McResult<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["replicate".to_string(), "status".to_string()];
        header.extend(self.columns.iter().cloned());
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.replicate.to_string()];
            match &row.error {
                None => {
                    rec.push("ok".into());
                    rec.extend(row.values.iter().map(|v| v.to_string()));
                }
                Some(e) => {
                    rec.push(format!("failed: {e}"));
                    rec.extend(std::iter::repeat_n(String::new(), self.columns.len()));
                }
            }
            wtr.write_record(&rec)?;
        }
        wtr.into_inner().map_err(|e| crate::error::McError::Serialize(e.to_string()))
    }

    /// Parses [`Records::to_csv_bytes`] output.
    pub fn from_csv_bytes(bytes: &[u8]) -> McResult<Self> {
        let mut rdr = csv::Reader::from_reader(bytes);
        let columns: Vec<String> = rdr.headers()?.iter().skip(2).map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let replicate = rec[0]
                .parse()
                .map_err(|e| crate::error::McError::Serialize(format!("bad replicate index: {e}")))?;
            if &rec[1] == "ok" {
                let values = rec
                    .iter()
                    .skip(2)
                    .map(|v| v.parse::<f64>().map_err(|e| crate::error::McError::Serialize(e.to_string())))
                    .collect::<McResult<_>>()?;
                rows.push(Row { replicate, values, error: None });
            } else {
                let msg = rec[1].strip_prefix("failed: ").unwrap_or(&rec[1]).to_string();
                rows.push(Row { replicate, values: Vec::new(), error: Some(msg) });
            }
        }
        Ok(Self { columns, rows })
    }

    /// Moments of every column.
    pub fn column_moments(&self) -> BTreeMap<String, Moments> {
        self.columns.iter().map(|c| (c.clone(), moments(&self.column(c)))).collect()
    }
}

/// Empirical value against theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub empirical: f64,
    pub theory: f64,
    pub se: f64,
    pub z_score: f64,
}

impl Comparison {
    /// Builds the comparison and its z-score.
    pub fn new(name: impl Into<String>, empirical: f64, theory: f64, se: f64) -> Self {
        Self {
            name: name.into(),
            empirical,
            theory,
            se,
            z_score: crate::stats::z_score(empirical, theory, se),
        }
    }
}

/// A gated quantity with its bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    /// `value ≤ upper`.
    pub fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self::within(name, value, None, Some(upper))
    }

    /// `value ≥ lower`.
    pub fn at_least(name: impl Into<String>, value: f64, lower: f64) -> Self {
        Self::within(name, value, Some(lower), None)
    }

    /// `lower ≤ value ≤ upper` for the given bounds; NaN always fails.
    pub fn within(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self { name: name.into(), value, lower, upper, pass }
    }
}

/// Reduced view of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub records: usize,
    pub failures: usize,
    pub columns: BTreeMap<String, Moments>,
    pub comparisons: Vec<Comparison>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    /// SHA-256 of `records.csv`.
    pub records_sha256: String,
}

impl Summary {
    /// Whether every check passed.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Check by name.
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Comparison by name.
    pub fn comparison(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }
}

/// Hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Records,
    pub summary: Summary,
    pub theory: serde_json::Value,
    pub hist: Option<Vec<Bin>>,
    /// Extra CSV tables as `(file name, contents)`.
    pub tables: Vec<(String, Vec<u8>)>,
}

impl ExperimentResult {
    /// Assembles the summary from records, comparisons and checks.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        config: &ExperimentConfig,
        records: Records,
        comparisons: Vec<Comparison>,
        checks: Vec<Check>,
        mut warnings: Vec<String>,
        theory: serde_json::Value,
        hist: Option<Vec<Bin>>,
        tables: Vec<(String, Vec<u8>)>,
    ) -> McResult<Self> {
        let failures = records.failures();
        if failures > 0 {
            warnings.push(format!("{failures} replicate(s) failed"));
        }
        let summary = Summary {
            kind: config.kind.name().to_string(),
            p: config.p,
            n: config.n,
            reps: config.reps,
            seed: config.seed()?,
            records: records.rows.len(),
            failures,
            columns: records.column_moments(),
            comparisons,
            checks,
            warnings,
            records_sha256: sha256_hex(&records.to_csv_bytes()?),
        };
        Ok(Self { config: config.clone(), records, summary, theory, hist, tables })
    }

    /// Writes `records.csv`, `summary.json`, `theory.json`, optional
    /// `hist.csv` and the extra tables into `dir`.
    pub fn write_to(&self, dir: &Path) -> McResult<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("records.csv"), self.records.to_csv_bytes()?)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;
        std::fs::write(dir.join("theory.json"), serde_json::to_string_pretty(&self.theory)? + "\n")?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)? + "\n")?;
        if let Some(h) = &self.hist {
            let mut wtr = csv::Writer::from_path(dir.join("hist.csv"))?;
            for b in h {
                wtr.serialize(b)?;
            }
            wtr.flush()?;
        }
        for (name, bytes) in &self.tables {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// Pretty JSON of the summary with a trailing newline.
    pub fn summary_json(&self) -> McResult<String> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Records {
        Records {
            columns: vec!["a".into(), "b".into()],
            rows: vec![
                Row { replicate: 0, values: vec![1.0, 0.1], error: None },
                Row { replicate: 1, values: vec![], error: Some("eigensolver did not converge".into()) },
                Row { replicate: 2, values: vec![3.0, 1.0 / 3.0], error: None },
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = table();
        let bytes = t.to_csv_bytes().unwrap();
        let back = Records::from_csv_bytes(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column_moments(), t.column_moments());
        assert_eq!(t.failures(), 1);
        assert_eq!(t.column("b"), vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn checks_reject_nan() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).pass);
        assert!(Check::within("x", 1.0, Some(0.5), Some(1.5)).pass);
        assert!(!Check::at_least("x", 0.1, 0.5).pass);
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
