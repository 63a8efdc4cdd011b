//! Prediction metrics and replication statistics.

use serde::{Deserialize, Serialize};

use crate::error::{CgpError, Result};
use crate::rng::SeedStream;

/// Metrics from one benchmark replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub mspe: f64,
    pub coverage: f64,
    pub median_pi_length: f64,
    pub runtime_seconds: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// Five-number summary of a replicate-level metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Aggregate over replicates of one scenario and method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryResult {
    pub mean_mspe: f64,
    /// Absent when there are fewer than two replicates.
    pub bootstrap_se: Option<f64>,
    pub coverage: DistributionSummary,
    pub pi_length: DistributionSummary,
    pub replicates: usize,
}

/// Mean squared prediction error.
pub fn mspe(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(CgpError::Dimension(format!(
            "mspe needs equal nonempty lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Coverage fraction and median width of predictive intervals.
pub fn interval_metrics(lower: &[f64], upper: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if lower.len() != upper.len() || lower.len() != truth.len() || lower.is_empty() {
        return Err(CgpError::Dimension(
            "interval metrics need equal nonempty lengths".into(),
        ));
    }
    let mut lengths = Vec::with_capacity(lower.len());
    let mut covered = 0usize;
    for i in 0..lower.len() {
        if lower[i] > upper[i] {
            return Err(CgpError::Data(format!(
                "interval {i} has lower {} above upper {}",
                lower[i], upper[i]
            )));
        }
        lengths.push(upper[i] - lower[i]);
        if truth[i] >= lower[i] && truth[i] <= upper[i] {
            covered += 1;
        }
    }
    Ok((covered as f64 / truth.len() as f64, median(&mut lengths)))
}

/// Bootstrap standard error of the mean of replicate-level values: resample
/// the values with replacement `b` times, average each resample, and take the
/// standard deviation of those averages.
pub fn bootstrap_se(values: &[f64], b: usize, seed: u64) -> Result<f64> {
    if values.len() < 2 {
        return Err(CgpError::Config(format!(
            "bootstrap needs at least 2 values, got {}",
            values.len()
        )));
    }
    let mut stream = SeedStream::new(seed);
    let n = values.len();
    let mut means = Vec::with_capacity(b);
    for _ in 0..b {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[stream.index(n)];
        }
        means.push(sum / n as f64);
    }
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1) as f64;
    Ok(var.sqrt())
}

/// Resample count used for published-table standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 50;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn summarize_values(values: &[f64]) -> DistributionSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    DistributionSummary {
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

/// Aggregates replicate results; the bootstrap runs over the MSPE values.
pub fn summarize(results: &[ReplicateResult], seed: u64) -> Result<SummaryResult> {
    if results.is_empty() {
        return Err(CgpError::Config("no replicates to summarize".into()));
    }
    let mspes: Vec<f64> = results.iter().map(|r| r.mspe).collect();
    let mean_mspe = mspes.iter().sum::<f64>() / mspes.len() as f64;
    let bootstrap = if mspes.len() >= 2 {
        Some(bootstrap_se(&mspes, BOOTSTRAP_RESAMPLES, seed)?)
    } else {
        None
    };
    let coverages: Vec<f64> = results.iter().map(|r| r.coverage).collect();
    let lengths: Vec<f64> = results.iter().map(|r| r.median_pi_length).collect();
    Ok(SummaryResult {
        mean_mspe,
        bootstrap_se: bootstrap,
        coverage: summarize_values(&coverages),
        pi_length: summarize_values(&lengths),
        replicates: results.len(),
    })
}
