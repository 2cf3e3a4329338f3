//! Evaluation: pooled RMSE, the model-based running-RMSE curve, crossing
//! times, improvement reports, and a Bayes posterior-mean reference
//! estimator that bounds what any window-based regressor can achieve on
//! synthetic data.

#![allow(clippy::needless_range_loop)]

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calib::{mean_first_n, running_average_curve, window_samples};
use crate::dataset::{make_windows, ChannelMode, Dataset};
use crate::error_model::{AngularRate, BiasPrior, GyroRecording};
use crate::nn::{forward, NetworkConfig, NetworkParams};
use crate::{Error, Result};

/// RMSE over time, pooled across all test recordings and axes.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseCurve {
    /// Strictly increasing times (s).
    pub times: Vec<f64>,
    /// RMSE at each time (deg/s).
    pub rmse: Vec<f64>,
}

impl RmseCurve {
    /// Curve value at time `t`, linearly interpolated between samples.
    /// `t` must lie within the curve's time span.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::invalid("empty curve")),
        };
        if !(t >= first && t <= last) {
            return Err(Error::invalid(format!(
                "time {t} s outside the curve span [{first}, {last}]"
            )));
        }
        let k = self.times.partition_point(|&x| x < t);
        if self.times[k] == t {
            return Ok(self.rmse[k]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (r0, r1) = (self.rmse[k - 1], self.rmse[k]);
        Ok(r0 + (r1 - r0) * (t - t0) / (t1 - t0))
    }

    /// Renders the curve as CSV with header `time_s,rmse_dps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,rmse_dps\n");
        for (t, r) in self.times.iter().zip(&self.rmse) {
            let _ = writeln!(out, "{},{}", t, r);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Root mean square error pooled over every axis of every item.
pub fn rmse(estimates: &[AngularRate], ground_truths: &[AngularRate]) -> Result<f64> {
    if estimates.len() != ground_truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimates vs {} ground truths",
            estimates.len(),
            ground_truths.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::invalid("rmse of an empty set"));
    }
    let mut sq = 0.0;
    for (e, g) in estimates.iter().zip(ground_truths) {
        for a in 0..3 {
            let d = e.axis(a) - g.axis(a);
            sq += d * d;
        }
    }
    Ok((sq / (3 * estimates.len()) as f64).sqrt())
}

/// Running RMSE of the zero-order estimator across a test set: at each
/// sample count `k` (time `k / rate`), the RMSE of the k-sample mean
/// against each recording's own ground-truth bias, pooled over recordings
/// and axes. Recordings must share rate and length.
pub fn model_based_rmse_curve(test_recordings: &[&GyroRecording]) -> Result<RmseCurve> {
    let first = test_recordings
        .first()
        .ok_or_else(|| Error::invalid("empty test set"))?;
    let n = first.len();
    for r in test_recordings {
        if r.sample_rate_hz != first.sample_rate_hz || r.len() != n {
            return Err(Error::invalid(format!(
                "test recordings must share rate and length; {:?} is {} samples at {} Hz, {:?} is {} at {}",
                first.gyro_id,
                n,
                first.sample_rate_hz,
                r.gyro_id,
                r.len(),
                r.sample_rate_hz
            )));
        }
    }
    let mut acc = vec![0.0f64; n];
    for rec in test_recordings {
        let gt = mean_first_n(rec, n);
        let curve = running_average_curve(rec);
        for (k, v) in curve.values.iter().enumerate() {
            for a in 0..3 {
                let d = v.axis(a) - gt.axis(a);
                acc[k] += d * d;
            }
        }
    }
    let denom = (3 * test_recordings.len()) as f64;
    Ok(RmseCurve {
        times: (1..=n).map(|k| k as f64 / first.sample_rate_hz).collect(),
        rmse: acc.into_iter().map(|s| (s / denom).sqrt()).collect(),
    })
}

/// RMSE of the network on start-of-recording windows of the test set,
/// against the ground-truth labels, pooled over all output channels.
pub fn nn_rmse_at_window(
    params: &NetworkParams,
    config: &NetworkConfig,
    test: &Dataset,
    window_s: f64,
    mode: ChannelMode,
    gyro_subset: Option<&[String]>,
) -> Result<f64> {
    let examples = make_windows(test, window_s, mode, gyro_subset)?;
    let first = examples
        .first()
        .ok_or_else(|| Error::invalid("no test windows"))?;
    if first.channels != config.in_channels || first.window_len != config.window_len {
        return Err(Error::ShapeMismatch(format!(
            "test windows are {} channels x {} samples, the model wants {} x {}",
            first.channels, first.window_len, config.in_channels, config.window_len
        )));
    }
    let mut sq = 0.0;
    let mut count = 0usize;
    for ex in &examples {
        let pred = forward(params, config, &ex.window)?;
        for (p, t) in pred.iter().zip(&ex.label) {
            let d = p - t;
            sq += d * d;
        }
        count += ex.label.len();
    }
    Ok((sq / count as f64).sqrt())
}

/// Earliest time at which the curve reaches `target` (rmse <= target),
/// linearly interpolating between the bracketing samples. `None` if the
/// curve never gets there.
pub fn crossing_time(curve: &RmseCurve, target_rmse: f64) -> Option<f64> {
    let k = curve.rmse.iter().position(|&r| r <= target_rmse)?;
    if k == 0 {
        return Some(curve.times[0]);
    }
    let (t0, t1) = (curve.times[k - 1], curve.times[k]);
    let (r0, r1) = (curve.rmse[k - 1], curve.rmse[k]);
    Some(t0 + (r0 - target_rmse) * (t1 - t0) / (r0 - r1))
}

/// Side-by-side comparison of the network against the model-based
/// estimator at one window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub window_s: f64,
    pub nn_rmse_dps: f64,
    pub model_based_rmse_at_window_dps: f64,
    /// Time for the model-based curve to reach the network's RMSE;
    /// `None` when it never does within the recording.
    pub crossing_time_s: Option<f64>,
    /// `100 * (crossing - window) / crossing`; `None` without a crossing.
    pub time_improvement_pct: Option<f64>,
    /// `100 * (model_rmse - nn_rmse) / model_rmse` at the window time.
    pub accuracy_improvement_pct: f64,
}

/// Builds the comparison for one evaluated window length.
pub fn improvement_report(
    nn_window_s: f64,
    nn_rmse: f64,
    curve: &RmseCurve,
) -> Result<ComparisonReport> {
    if !(nn_rmse.is_finite() && nn_rmse >= 0.0) {
        return Err(Error::invalid(format!(
            "nn rmse must be >= 0, got {nn_rmse}"
        )));
    }
    let model_rmse = curve.value_at(nn_window_s)?;
    if model_rmse <= 0.0 {
        return Err(Error::invalid(
            "model-based rmse at the window is 0; improvement is undefined",
        ));
    }
    let crossing = crossing_time(curve, nn_rmse);
    Ok(ComparisonReport {
        window_s: nn_window_s,
        nn_rmse_dps: nn_rmse,
        model_based_rmse_at_window_dps: model_rmse,
        crossing_time_s: crossing,
        time_improvement_pct: crossing.map(|tc| 100.0 * (tc - nn_window_s) / tc),
        accuracy_improvement_pct: 100.0 * (model_rmse - nn_rmse) / model_rmse,
    })
}

/// Plain-text table over several window lengths, one report per row.
pub fn render_table(reports: &[ComparisonReport]) -> String {
    let headers = [
        "Window [s]",
        "NN RMSE [deg/s]",
        "Model RMSE [deg/s]",
        "Crossing [s]",
        "Calibration time (same performance) [%]",
        "Accuracy improvement (same calibration time) [%]",
    ];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                format!("{:.2}", r.window_s),
                format!("{:.6}", r.nn_rmse_dps),
                format!("{:.6}", r.model_based_rmse_at_window_dps),
                r.crossing_time_s
                    .map_or("not reached".into(), |t| format!("{t:.2}")),
                r.time_improvement_pct
                    .map_or("not reached".into(), |p| format!("{p:.1}")),
                format!("{:.1}", r.accuracy_improvement_pct),
            ]
        })
        .collect();
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([h.len()])
                .max()
                .unwrap()
        })
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{:>width$}", c, width = widths[i]);
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&headers.map(String::from));
    line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for row in &rows {
        line(row);
    }
    out
}

/// Posterior-mean bias estimate for a stationary window with known noise
/// level, per axis. With a Gaussian prior this is the closed-form
/// shrinkage `(n tau^2 xbar + sigma^2 mu0) / (n tau^2 + sigma^2)`; with a
/// uniform prior the posterior mean over the box is integrated numerically
/// (composite Simpson, 4096 intervals per axis).
pub fn bayes_posterior_mean(
    window: &[AngularRate],
    noise_std: f64,
    prior: &BiasPrior,
) -> Result<AngularRate> {
    if window.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    if !(noise_std.is_finite() && noise_std > 0.0) {
        return Err(Error::invalid(format!(
            "noise std must be > 0, got {noise_std}"
        )));
    }
    prior.validate()?;
    let n = window.len() as f64;
    let mut xbar = [0.0f64; 3];
    for (k, s) in window.iter().enumerate() {
        for a in 0..3 {
            xbar[a] += (s.axis(a) - xbar[a]) / (k + 1) as f64;
        }
    }
    let var = noise_std * noise_std;
    let mut post = [0.0f64; 3];
    match prior {
        BiasPrior::Gaussian { mean, std } => {
            for a in 0..3 {
                let tau2 = std[a] * std[a];
                post[a] = (n * tau2 * xbar[a] + var * mean[a]) / (n * tau2 + var);
            }
        }
        BiasPrior::Uniform { lo, hi } => {
            for a in 0..3 {
                post[a] = uniform_posterior_mean_1d(xbar[a], n, var, lo[a], hi[a]);
            }
        }
    }
    Ok(AngularRate::from_array(post))
}

/// Posterior mean of a Gaussian likelihood truncated to `[lo, hi]`.
/// The log-likelihood is shifted by its maximum over the box before
/// exponentiation so narrow posteriors deep inside wide boxes stay
/// representable.
fn uniform_posterior_mean_1d(xbar: f64, n: f64, var: f64, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    const INTERVALS: usize = 4096;
    let log_w = |b: f64| -n * (b - xbar) * (b - xbar) / (2.0 * var);
    let peak = log_w(xbar.clamp(lo, hi));
    let h = (hi - lo) / INTERVALS as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=INTERVALS {
        let b = lo + i as f64 * h;
        let w = (log_w(b) - peak).exp();
        let coeff = if i == 0 || i == INTERVALS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        num += coeff * w * b;
        den += coeff * w;
    }
    if den == 0.0 {
        // Posterior narrower than the grid: it has collapsed onto the peak.
        return xbar.clamp(lo, hi);
    }
    num / den
}

/// Per-recording zero-order estimates over a fixed window, paired with the
/// recordings' full-length ground-truth biases. A convenience for pooled
/// RMSE evaluations of the model-based approach at one window length.
pub fn zero_order_estimates(
    recordings: &[&GyroRecording],
    window_s: f64,
) -> Result<(Vec<AngularRate>, Vec<AngularRate>)> {
    let mut estimates = Vec::with_capacity(recordings.len());
    let mut truths = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let n = window_samples(rec, window_s)?;
        estimates.push(mean_first_n(rec, n));
        truths.push(mean_first_n(rec, rec.len()));
    }
    Ok((estimates, truths))
}
