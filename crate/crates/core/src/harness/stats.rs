use serde::{Deserialize, Serialize};

use crate::algorithms::RegretTrace;
use crate::error::{Error, Result};

/// z for a two-sided 95% normal interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Mean cumulative regret at one iteration with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretStat {
    pub iteration: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Sample mean and sd (n − 1 denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-iteration mean ± 1.96·sd/√R of cumulative regret across traces.
pub fn regret_stats(traces: &[RegretTrace]) -> Result<Vec<RegretStat>> {
    let curves: Vec<Vec<f64>> = traces.iter().map(RegretTrace::cumulative_regret).collect();
    curve_stats(&curves)
}

/// As [`regret_stats`], on raw cumulative-regret curves.
pub fn curve_stats(curves: &[Vec<f64>]) -> Result<Vec<RegretStat>> {
    if curves.len() < 2 {
        return Err(Error::invalid(format!(
            "confidence bands need at least 2 traces, got {}",
            curves.len()
        )));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("traces differ in length"));
    }
    let r = curves.len() as f64;
    let mut column = vec![0.0; curves.len()];
    Ok((0..len)
        .map(|i| {
            for (slot, c) in column.iter_mut().zip(curves) {
                *slot = c[i];
            }
            let (mean, sd) = mean_sd(&column);
            let half = Z_95 * sd / r.sqrt();
            RegretStat {
                iteration: i + 1,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
            }
        })
        .collect())
}
