//! CSV and summary output of result rows.

use crate::error::HarnessError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str = "trial,scenario,estimator,metric,value,units,seed";

/// One metric value of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub scenario: String,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub units: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Summary,
}

/// Statistics of one (scenario, estimator, metric) group over its finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub scenario: String,
    pub estimator: String,
    pub metric: String,
    pub units: String,
    pub n: usize,
    pub nonfinite: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.scenario.clone(),
            r.estimator.clone(),
            r.metric.clone(),
            format!("{:?}", r.value),
            r.units.clone(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let num = |i: usize| field(i).parse::<f64>().map_err(|e| HarnessError::Report(format!("column {i}: {e}")));
        rows.push(ResultRow {
            trial: num(0)? as usize,
            scenario: field(1),
            estimator: field(2),
            metric: field(3),
            value: num(4)?,
            units: field(5),
            seed: field(6).parse().map_err(|e| HarnessError::Report(format!("seed: {e}")))?,
        });
    }
    Ok(rows)
}

/// Groups in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryLine> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String), (String, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let key = (r.scenario.clone(), r.estimator.clone(), r.metric.clone());
        let e = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.units.clone(), Vec::new())
        });
        e.1.push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let (units, values) = &groups[&key];
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let n = finite.len();
            let mean = if n > 0 { finite.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std = match n {
                0 => f64::NAN,
                1 => 0.0,
                _ => (finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt(),
            };
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (min, max) = if n > 0 { (min, max) } else { (f64::NAN, f64::NAN) };
            SummaryLine {
                scenario: key.0,
                estimator: key.1,
                metric: key.2,
                units: units.clone(),
                n,
                nonfinite: values.len() - n,
                mean,
                std,
                min,
                max,
            }
        })
        .collect()
}

/// Whitespace-separated table, one line per group; numbers in shortest
/// round-trip form.
pub fn write_summary<W: Write>(rows: &[ResultRow], mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "scenario estimator metric units n nonfinite mean std min max")?;
    for s in summarize(rows) {
        writeln!(
            out,
            "{} {} {} {} {} {} {:?} {:?} {:?} {:?}",
            s.scenario, s.estimator, s.metric, s.units, s.n, s.nonfinite, s.mean, s.std, s.min, s.max
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `results.csv` or `summary.txt` into `dir` and returns its path.
pub fn emit_report(rows: &[ResultRow], format: ReportFormat, dir: &Path) -> Result<PathBuf, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Report("no rows to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(match format {
        ReportFormat::Csv => "results.csv",
        ReportFormat::Summary => "summary.txt",
    });
    let file = std::fs::File::create(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let out = std::io::BufWriter::new(file);
    match format {
        ReportFormat::Csv => write_csv(rows, out)?,
        ReportFormat::Summary => write_summary(rows, out)?,
    }
    Ok(path)
}
