//! CSV rows and the JSON run manifest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mgoig::evaluation::{Bound, ErrorEntry};
use mgoig::{rational, Rational};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// One CSV line. Rationals appear as decimals in `value`/`bound` and as
/// exact "p/q" strings in `value_exact`/`bound_exact` (empty when not exact).
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Row {
    pub experiment_id: String,
    pub learner: String,
    pub g_id: String,
    pub n: String,
    pub metric: String,
    pub value: String,
    pub value_exact: String,
    pub bound: String,
    pub bound_exact: String,
    pub bound_satisfied: String,
    pub ci_halfwidth: String,
    pub seed: u64,
    /// True when the row is an exact check whose failure must fail the run.
    #[serde(skip)]
    pub exact_check: bool,
}

fn decimal(x: f64) -> String {
    format!("{x:.10}")
}

pub fn exact(r: &Rational) -> (String, String) {
    (decimal(rational::to_f64(r)), rational::format(r))
}

impl Row {
    pub fn new(cfg: &ExperimentConfig, learner: &str, g_id: Option<usize>, n: Option<usize>, metric: &str) -> Self {
        Row {
            experiment_id: cfg.id(),
            learner: learner.to_string(),
            g_id: g_id.map(|g| g.to_string()).unwrap_or_default(),
            n: n.map(|n| n.to_string()).unwrap_or_default(),
            metric: metric.to_string(),
            value: String::new(),
            value_exact: String::new(),
            bound: String::new(),
            bound_exact: String::new(),
            bound_satisfied: String::new(),
            ci_halfwidth: String::new(),
            seed: cfg.seed,
            exact_check: false,
        }
    }

    pub fn sup_group(mut self) -> Self {
        self.g_id = "sup".into();
        self
    }

    pub fn value_exact(mut self, r: &Rational) -> Self {
        (self.value, self.value_exact) = exact(r);
        self
    }

    pub fn value_f64(mut self, x: f64) -> Self {
        self.value = decimal(x);
        self
    }

    pub fn value_mean(mut self, r: &Rational) -> Self {
        self.value = decimal(rational::to_f64(r));
        self
    }

    pub fn bound_exact(mut self, r: &Rational) -> Self {
        (self.bound, self.bound_exact) = exact(r);
        self
    }

    pub fn bound_f64(mut self, x: f64) -> Self {
        self.bound = decimal(x);
        self
    }

    pub fn satisfied(mut self, ok: bool) -> Self {
        self.bound_satisfied = ok.to_string();
        self
    }

    /// Marks the row as an exact check with the given outcome.
    pub fn checked(self, ok: bool) -> Self {
        let mut r = self.satisfied(ok);
        r.exact_check = true;
        r
    }

    pub fn half_width(mut self, hw: Option<f64>) -> Self {
        self.ci_halfwidth = hw.map(decimal).unwrap_or_default();
        self
    }

    /// Row from a library error entry; exact when both value and bound are.
    pub fn from_entry(cfg: &ExperimentConfig, learner: &str, n: usize, metric: &str, e: &ErrorEntry) -> Self {
        let mut row = Row::new(cfg, learner, e.group_id, Some(n), metric);
        row = if e.value_exact { row.value_exact(&e.value) } else { row.value_mean(&e.value) };
        if e.group_id.is_none() {
            row = row.sup_group();
        }
        row = row.half_width(e.half_width);
        match &e.bound {
            Some(Bound::Exact(b)) => row = row.bound_exact(b),
            Some(Bound::Approx(b)) => row = row.bound_f64(*b),
            None => {}
        }
        if let Some(ok) = e.satisfied {
            let exact_check = e.value_exact && e.bound.as_ref().is_some_and(|b| b.is_exact());
            row = if exact_check { row.checked(ok) } else { row.satisfied(ok) };
        }
        row
    }

    pub fn failed_exact(&self) -> bool {
        self.exact_check && self.bound_satisfied == "false"
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "experiment_id", "learner", "g_id", "n", "metric", "value", "value_exact", "bound", "bound_exact",
            "bound_satisfied", "ci_halfwidth", "seed",
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub id: String,
    pub config_sha256: String,
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub versions: Versions,
    pub csv: String,
    pub rows: usize,
    pub exact_failures: usize,
    pub notes: &'a [String],
}

#[derive(Serialize)]
pub struct Versions {
    pub mgoig: &'static str,
    pub mgoig_cli: &'static str,
}

/// SHA-256 of the canonical JSON of the resolved config.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Writes `<id>.csv` and `<id>.manifest.json` and returns their paths.
pub fn write_outputs(cfg: &ExperimentConfig, rows: &[Row], notes: &[String]) -> Result<(PathBuf, PathBuf)> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let id = cfg.id();
    let csv_path = dir.join(format!("{id}.csv"));
    write_csv(&csv_path, rows)?;
    let manifest = Manifest {
        experiment: cfg.experiment.name(),
        id: id.clone(),
        config_sha256: config_hash(cfg)?,
        config: cfg,
        seed: cfg.seed,
        versions: Versions { mgoig: mgoig::VERSION, mgoig_cli: env!("CARGO_PKG_VERSION") },
        csv: format!("{id}.csv"),
        rows: rows.len(),
        exact_failures: rows.iter().filter(|r| r.failed_exact()).count(),
        notes,
    };
    let man_path = dir.join(format!("{id}.manifest.json"));
    std::fs::write(&man_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok((csv_path, man_path))
}

