//! Cross-run statistics: Student's t intervals, trailing moving averages and
//! relative gain tables.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::admission::SchemeKind;

/// Two-sided quantile `t_{1 - (1 - confidence)/2, df}`.
pub fn student_t_critical(confidence: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid Student's t parameters");
    dist.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n - 1) standard deviation; `None` below two values.
pub fn sample_stddev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    if values.iter().all(|&x| x == values[0]) {
        return Some(0.0);
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// 95% half-width `t_{0.975, n-1} * s / sqrt(n)`; `None` for fewer than two runs.
pub fn ci95_half_width(values: &[f64]) -> Option<f64> {
    let s = sample_stddev(values)?;
    let n = values.len();
    Some(student_t_critical(0.95, n - 1) * s / (n as f64).sqrt())
}

/// Trailing mean over the last `min(window, i + 1)` values at each index.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "moving-average window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        let n = (i + 1).min(window);
        // Re-sum at each full-window boundary to stop drift from piling up.
        if i >= window && i % window == 0 {
            sum = series[i + 1 - n..=i].iter().sum();
        }
        out.push(sum / n as f64);
    }
    out
}

/// Mean blocking and utilization for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeMetrics {
    pub scheme: SchemeKind,
    pub blocking: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub target: SchemeKind,
    pub baseline: SchemeKind,
    /// `None` when the baseline blocking is zero.
    pub blocking_decrease_pct: Option<f64>,
    /// Relative increase; `None` when the baseline utilization is zero.
    pub utilization_increase_pct: Option<f64>,
}

/// Relative percentage decrease from `baseline` to `target`.
pub fn relative_decrease_pct(baseline: f64, target: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (baseline - target) / baseline * 100.0)
}

/// Gains of `target` over every other scheme in `metrics`, in input order.
pub fn compute_gains(metrics: &[SchemeMetrics], target: SchemeKind) -> Vec<GainRow> {
    let Some(t) = metrics.iter().find(|m| m.scheme == target) else {
        return Vec::new();
    };
    metrics
        .iter()
        .filter(|m| m.scheme != target)
        .map(|b| GainRow {
            target,
            baseline: b.scheme,
            blocking_decrease_pct: relative_decrease_pct(b.blocking, t.blocking),
            utilization_increase_pct: relative_decrease_pct(b.utilization, t.utilization).map(|d| -d),
        })
        .collect()
}
