//! CSV input parsing and JSON report writing.
//!
//! Input layout: directional coordinates in ambient columns `x0..xq` (or a
//! single `angle` column in radians for circle data), responses in column
//! `y`, and a second directional block in columns `u0..uq2`. A header row
//! is required. Directional rows are renormalized when their norm is
//! within 1e-6 of one and rejected otherwise, with the offending file line
//! reported (the header is line 1).

use anyhow::{bail, Context, Result};
use dirgof::estimators::{DirDirSample, DirLinSample, DirSample};
use dirgof::UnitVector;
use serde::Serialize;
use std::path::Path;

pub struct CsvColumns {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvColumns {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        let header: Vec<String> = reader
            .headers()
            .context("missing header row")?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 2; // header occupies line 1
            let record = record.with_context(|| format!("malformed CSV row at line {line}"))?;
            if record.len() != header.len() {
                bail!(
                    "malformed CSV row at line {line}: {} fields, header has {}",
                    record.len(),
                    header.len()
                );
            }
            let mut row = Vec::with_capacity(record.len());
            for (name, field) in header.iter().zip(record.iter()) {
                let value: f64 = field.trim().parse().with_context(|| {
                    format!("malformed CSV row at line {line}: column `{name}` = {field:?}")
                })?;
                row.push(value);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            bail!("no data rows in {}", path.display());
        }
        Ok(Self { header, rows })
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("missing column `{name}` (header: {:?})", self.header))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Directional sample from ambient columns `<prefix>0..<prefix>q`, or
    /// from the `angle` column when `angles` is set (q = 1).
    pub fn directions(&self, prefix: &str, q: usize, angles: bool) -> Result<DirSample> {
        if angles {
            let idx = self.column_index("angle")?;
            let pts = self
                .rows
                .iter()
                .map(|r| UnitVector::from_angle(r[idx]))
                .collect();
            return Ok(DirSample::new(pts)?);
        }
        let idxs: Vec<usize> = (0..=q)
            .map(|j| self.column_index(&format!("{prefix}{j}")))
            .collect::<Result<_>>()?;
        let mut pts = Vec::with_capacity(self.rows.len());
        for (row_idx, row) in self.rows.iter().enumerate() {
            let coords: Vec<f64> = idxs.iter().map(|&i| row[i]).collect();
            let point = UnitVector::new(coords).with_context(|| {
                format!(
                    "line {}: directional row is not unit norm within 1e-6",
                    row_idx + 2
                )
            })?;
            pts.push(point);
        }
        Ok(DirSample::new(pts)?)
    }

    pub fn dirlin(&self, q: usize, angles: bool) -> Result<DirLinSample> {
        let dirs = self.directions("x", q, angles)?;
        let ys = self.column("y")?;
        Ok(DirLinSample::new(dirs, ys)?)
    }

    pub fn dirdir(&self, q1: usize, q2: usize) -> Result<DirDirSample> {
        let first = self.directions("x", q1, false)?;
        let second = self.directions("u", q2, false)?;
        Ok(DirDirSample::new(first, second)?)
    }
}

/// The versioned JSON test report.
#[derive(Serialize)]
pub struct Report {
    pub schema: u32,
    pub statistic_name: String,
    pub statistic: f64,
    pub center: f64,
    pub scale: f64,
    pub standardized: f64,
    pub p_asymptotic: f64,
    pub p_resampled: f64,
    pub replicates: usize,
    pub failed_replicates: usize,
    pub method: dirgof::resampling::CalibrationMethod,
    pub alpha: f64,
    pub reject: bool,
    pub seed: u64,
    pub n: usize,
    pub bandwidths: dirgof::estimators::Bandwidths,
    pub rate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<serde_json::Value>,
    pub effective_config: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn from_outcome(
        outcome: &dirgof::resampling::CalibratedOutcome,
        alpha: f64,
        effective_config: serde_json::Value,
        diagnostics: Vec<String>,
    ) -> Self {
        Self {
            schema: 1,
            statistic_name: outcome.base.meta.statistic_name.clone(),
            statistic: outcome.base.statistic,
            center: outcome.base.center,
            scale: outcome.base.scale,
            standardized: outcome.base.standardized,
            p_asymptotic: outcome.base.p_asymptotic,
            p_resampled: outcome.p_resampled,
            replicates: outcome.replicate_statistics.len(),
            failed_replicates: outcome.failed_replicates,
            method: outcome.method,
            alpha,
            reject: outcome.p_resampled <= alpha,
            seed: outcome.seed,
            n: outcome.base.meta.n,
            bandwidths: outcome.base.meta.bandwidths,
            rate: outcome.base.rate_desc.clone(),
            theta: outcome.base.meta.theta.clone(),
            effective_config,
            diagnostics,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    pub fn verdict_line(&self) -> String {
        format!(
            "{}: statistic = {:.6e}, p_resampled = {:.4}, p_asymptotic = {:.4} -> {} H0 at alpha = {}",
            self.statistic_name,
            self.statistic,
            self.p_resampled,
            self.p_asymptotic,
            if self.reject { "REJECT" } else { "fail to reject" },
            self.alpha,
        )
    }
}
