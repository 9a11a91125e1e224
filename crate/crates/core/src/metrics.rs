//! Accuracy metrics on velocity-norm series and the strategy comparison table.
//!
//! All four metrics take the ground-truth series first. Variance in [`vaf`]
//! uses the population convention (divide by `M`).

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("series lengths differ: {truth} truth vs {pred} predicted")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("empty series")]
    Empty,
    #[error("ground truth is constant; the metric is undefined")]
    ConstantTruth,
    #[error("baseline value is zero; improvement is undefined")]
    ZeroBaseline,
    #[error("series values must be finite and non-negative")]
    InvalidValue,
}

/// Velocity-vector norms, m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries(Vec<f64>);

impl NormSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::Empty);
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetricsError::InvalidValue);
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn mean(&self) -> f64 {
        mean(&self.0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

fn residuals(truth: &NormSeries, pred: &NormSeries) -> Result<Vec<f64>, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    Ok(truth.0.iter().zip(&pred.0).map(|(x, p)| x - p).collect())
}

pub fn rmse(truth: &NormSeries, pred: &NormSeries) -> Result<f64, MetricsError> {
    let r = residuals(truth, pred)?;
    Ok((r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64).sqrt())
}

pub fn mae(truth: &NormSeries, pred: &NormSeries) -> Result<f64, MetricsError> {
    let r = residuals(truth, pred)?;
    Ok(r.iter().map(|e| e.abs()).sum::<f64>() / r.len() as f64)
}

/// Coefficient of determination `1 − SS_res/SS_tot`.
pub fn r_squared(truth: &NormSeries, pred: &NormSeries) -> Result<f64, MetricsError> {
    let r = residuals(truth, pred)?;
    let m = truth.mean();
    let ss_tot: f64 = truth.0.iter().map(|x| (x - m).powi(2)).sum();
    if truth.len() < 2 || ss_tot == 0.0 {
        return Err(MetricsError::ConstantTruth);
    }
    let ss_res: f64 = r.iter().map(|e| e * e).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Variance accounted for, percent.
pub fn vaf(truth: &NormSeries, pred: &NormSeries) -> Result<f64, MetricsError> {
    let r = residuals(truth, pred)?;
    let var_truth = population_variance(&truth.0);
    if truth.len() < 2 || var_truth == 0.0 {
        return Err(MetricsError::ConstantTruth);
    }
    Ok((1.0 - population_variance(&r) / var_truth) * 100.0)
}

/// `100·(baseline − candidate)/baseline`.
pub fn improvement_percent(baseline: f64, candidate: f64) -> Result<f64, MetricsError> {
    if baseline == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (baseline - candidate) / baseline)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub vaf: f64,
}

impl MetricRow {
    pub fn compute(truth: &NormSeries, pred: &NormSeries) -> Result<Self, MetricsError> {
        Ok(Self {
            rmse: rmse(truth, pred)?,
            mae: mae(truth, pred)?,
            r2: r_squared(truth, pred)?,
            vaf: vaf(truth, pred)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub name: String,
    pub metrics: MetricRow,
    /// `(rmse %, mae %)` relative to the baseline strategy, when there is one.
    pub improvement: Option<(f64, f64)>,
}

/// Strategy comparison: metrics as rows, strategies as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub strategies: Vec<StrategyResult>,
    /// Name of the baseline column, if present.
    pub baseline: Option<String>,
}

impl EvalReport {
    /// Builds the report; improvements are computed for every non-baseline
    /// strategy against the strategy named `baseline`.
    pub fn new(rows: Vec<(String, MetricRow)>, baseline: &str) -> Result<Self, MetricsError> {
        let base = rows.iter().find(|(n, _)| n == baseline).map(|(_, m)| *m);
        let mut strategies = Vec::with_capacity(rows.len());
        for (name, metrics) in rows {
            let improvement = match base {
                Some(b) if name != baseline => Some((
                    improvement_percent(b.rmse, metrics.rmse)?,
                    improvement_percent(b.mae, metrics.mae)?,
                )),
                _ => None,
            };
            strategies.push(StrategyResult {
                name,
                metrics,
                improvement,
            });
        }
        Ok(Self {
            strategies,
            baseline: base.map(|_| baseline.to_string()),
        })
    }

    pub fn get(&self, name: &str) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.name == name)
    }

    fn rows(&self) -> Vec<(&'static str, Vec<Option<f64>>)> {
        let col = |f: &dyn Fn(&StrategyResult) -> Option<f64>| self.strategies.iter().map(f).collect::<Vec<_>>();
        vec![
            ("RMSE [m/s]", col(&|s| Some(s.metrics.rmse))),
            ("RMSE [%]", col(&|s| s.improvement.map(|i| i.0))),
            ("MAE [m/s]", col(&|s| Some(s.metrics.mae))),
            ("MAE [%]", col(&|s| s.improvement.map(|i| i.1))),
            ("R²", col(&|s| Some(s.metrics.r2))),
            ("VAF", col(&|s| Some(s.metrics.vaf))),
        ]
    }

    /// Aligned text table: metrics as rows, strategies as columns.
    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|(label, vals)| {
                let mut line = vec![label.to_string()];
                line.extend(vals.iter().zip(&self.strategies).map(|(v, _)| match (label, v) {
                    (_, None) => "N/A".to_string(),
                    (l, Some(x)) if l.contains('%') || *l == "VAF" => format!("{x:.2}"),
                    (_, Some(x)) => format!("{x:.4}"),
                }));
                line
            })
            .collect();
        let mut header = vec!["Metric".to_string()];
        header.extend(self.strategies.iter().map(|s| s.name.clone()));
        let all: Vec<&Vec<String>> = std::iter::once(&header).chain(cells.iter()).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| all.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in all.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            let _ = writeln!(out, "| {} |", line.join(" | "));
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
            }
        }
        out
    }

    /// `metric,<strategy>...` with one row per metric; 9 significant digits,
    /// empty cells where a value is undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for s in &self.strategies {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        for (label, vals) in self.rows() {
            let key = match label {
                "RMSE [m/s]" => "rmse_mps",
                "RMSE [%]" => "rmse_improvement_pct",
                "MAE [m/s]" => "mae_mps",
                "MAE [%]" => "mae_improvement_pct",
                "R²" => "r2",
                _ => "vaf",
            };
            out.push_str(key);
            for v in vals {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format_sig9(v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Decimal text with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    format!("{v:.8e}")
}
