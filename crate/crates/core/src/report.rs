//! Experiment reports: named metrics, series and verdicts, written as JSON
//! plus one CSV per series.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value <= tolerance`
    AtMost,
    /// `value >= tolerance`
    AtLeast,
    /// `|value| <= tolerance`
    AbsAtMost,
}

impl Comparison {
    pub fn holds(self, value: f64, tolerance: f64) -> bool {
        match self {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
            Comparison::AbsAtMost => value.abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub metric: String,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub passed: bool,
}

/// Least-squares line through `(log2 x, log2 y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// root mean square of the residuals in `log2 y`
    pub residual_rms: f64,
    pub points: usize,
}

pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid_input(
            "slope fit needs at least two points with positive coordinates",
        ));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let m = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid_input("slope fit needs distinct abscissae"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual_rms: (rss / m).sqrt(),
        points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub verdicts: BTreeMap<String, Verdict>,
    /// where each reference value came from
    pub notes: BTreeMap<String, String>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            config,
            metrics: BTreeMap::new(),
            series: BTreeMap::new(),
            fits: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.insert(name.into(), value);
        self
    }

    pub fn note(&mut self, name: impl Into<String>, text: impl Into<String>) -> &mut Self {
        self.notes.insert(name.into(), text.into());
        self
    }

    pub fn series(&mut self, name: impl Into<String>, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.insert(name.into(), points);
        self
    }

    /// Record `metric = value` and a verdict on it. NaN never passes.
    pub fn check(
        &mut self,
        verdict: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
        comparison: Comparison,
        tolerance: f64,
    ) -> bool {
        let metric = metric.into();
        let passed = comparison.holds(value, tolerance);
        self.metrics.insert(metric.clone(), value);
        self.verdicts.insert(
            verdict.into(),
            Verdict {
                metric,
                comparison,
                tolerance,
                passed,
            },
        );
        passed
    }

    /// Fit the named series and store slope and residual as metrics.
    pub fn fit(&mut self, series: &str) -> Result<SlopeFit> {
        let pts = self
            .series
            .get(series)
            .ok_or_else(|| invalid_input(format!("no series `{series}`")))?;
        let fit = loglog_slope(pts)?;
        self.metrics.insert(format!("{series}.slope"), fit.slope);
        self.metrics
            .insert(format!("{series}.residual_rms"), fit.residual_rms);
        self.fits.insert(series.to_string(), fit.clone());
        Ok(fit)
    }

    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| v.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.verdicts
            .iter()
            .filter(|(_, v)| !v.passed)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Write `report.json` and `series_<name>.csv` into `dir`, returning the
    /// paths written.
    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()?)?;
        out.push(path);
        for (name, pts) in &self.series {
            let path = dir.join(format!("series_{}.csv", file_stem(name)));
            let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "x,y")?;
            for (x, y) in pts {
                writeln!(w, "{x:e},{y:e}")?;
            }
            w.flush()?;
            out.push(path);
        }
        Ok(out)
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (0..5)
            .map(|k| (2f64.powi(-k), 3.0 * 2f64.powf(-1.5 * k as f64)))
            .collect();
        let fit = loglog_slope(&pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
        assert!(loglog_slope(&[(1.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn verdicts_reference_metrics() {
        let mut r = ExperimentReport::new("demo", serde_json::json!({"seed": 1}));
        assert!(r.check("small", "err", 1e-9, Comparison::AtMost, 1e-8));
        assert!(!r.check("nan", "bad", f64::NAN, Comparison::AbsAtMost, 1.0));
        assert!(!r.passed());
        assert_eq!(r.failures(), vec!["nan"]);
        for v in r.verdicts.values() {
            assert!(r.metrics.contains_key(&v.metric));
        }
    }

    #[test]
    fn emits_json_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ExperimentReport::new("demo", serde_json::Value::Null);
        assert_eq!(r.emit(dir.path()).unwrap().len(), 1);
        r.series(
            "decay",
            (1..=5).map(|k| (k as f64, 1.0 / k as f64)).collect(),
        );
        let files = r.emit(dir.path()).unwrap();
        let csv = fs::read_to_string(&files[1]).unwrap();
        assert_eq!(csv.lines().count(), 6);
        let first = fs::read(&files[0]).unwrap();
        r.emit(dir.path()).unwrap();
        assert_eq!(first, fs::read(&files[0]).unwrap());
    }
}
