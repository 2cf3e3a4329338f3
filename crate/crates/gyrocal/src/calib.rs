//! Zero-order (averaging) calibration and convergence curves.
//!
//! The zero-order estimate of a stationary gyro's bias is the sample mean of
//! a recording window. Its convergence over time is what the network is
//! benchmarked against, both for a single gyro and for an averaged
//! multi-gyro array.
//!
//! Time convention: a statistic over the first `k` samples is plotted at
//! `k / sample_rate`, so a window of `round(w * rate)` samples lines up with
//! curve time `w`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error_model::{AngularRate, GyroRecording};
use crate::{Error, Result};

/// Per-axis running-estimate trajectory over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    /// Strictly increasing times (s).
    pub times: Vec<f64>,
    /// Estimate at each time (deg/s).
    pub values: Vec<AngularRate>,
}

impl ConvergenceCurve {
    /// Renders the curve as CSV with header `time_s,x_dps,y_dps,z_dps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,x_dps,y_dps,z_dps\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{},{},{}", t, v.x, v.y, v.z);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Mean of the first `n` samples per axis, via the incremental recurrence
/// `m_k = m_{k-1} + (x_k - m_{k-1}) / (k + 1)`.
pub(crate) fn mean_first_n(recording: &GyroRecording, n: usize) -> AngularRate {
    debug_assert!(n >= 1 && n <= recording.len());
    let mut m = [0.0f64; 3];
    for (k, s) in recording.samples[..n].iter().enumerate() {
        let sample = s.as_array();
        for a in 0..3 {
            m[a] += (sample[a] - m[a]) / (k + 1) as f64;
        }
    }
    AngularRate::from_array(m)
}

/// Converts a window length in seconds to a sample count for a recording.
pub(crate) fn window_samples(recording: &GyroRecording, window_s: f64) -> Result<usize> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::invalid(format!(
            "window must be positive, got {window_s} s"
        )));
    }
    let n = (window_s * recording.sample_rate_hz).round() as usize;
    if n < 1 {
        return Err(Error::invalid(format!(
            "window of {window_s} s covers no samples at {} Hz",
            recording.sample_rate_hz
        )));
    }
    if n > recording.len() {
        return Err(Error::invalid(format!(
            "window of {window_s} s needs {n} samples, recording {:?} has {}",
            recording.gyro_id,
            recording.len()
        )));
    }
    Ok(n)
}

/// Zero-order bias estimate: the sample mean over the first `window_s`
/// seconds of the recording.
pub fn zero_order_bias(recording: &GyroRecording, window_s: f64) -> Result<AngularRate> {
    let n = window_samples(recording, window_s)?;
    Ok(mean_first_n(recording, n))
}

/// Running-average trajectory of one recording: the value at time
/// `k / rate` is the mean of the first `k` samples.
pub fn running_average_curve(recording: &GyroRecording) -> ConvergenceCurve {
    running_average_of(recording.sample_rate_hz, recording.samples.iter().copied())
}

/// Running average of the across-gyro mean signal.
///
/// All recordings must be synchronized: equal rates and lengths. The value
/// at time `k / rate` is the mean over the first `k` across-gyro averages;
/// with `N` gyros its variance shrinks as `sigma^2 / (N * k)`. Ground truth
/// for such an averaged array is taken to be the mean of the member biases.
pub fn mg_running_average(recordings: &[&GyroRecording]) -> Result<ConvergenceCurve> {
    let first = recordings
        .first()
        .ok_or_else(|| Error::invalid("need at least one recording"))?;
    for r in recordings {
        if r.sample_rate_hz != first.sample_rate_hz {
            return Err(Error::invalid(format!(
                "sample-rate mismatch: {} has {} Hz, {} has {} Hz",
                first.gyro_id, first.sample_rate_hz, r.gyro_id, r.sample_rate_hz
            )));
        }
        if r.len() != first.len() {
            return Err(Error::invalid(format!(
                "length mismatch: {} has {} samples, {} has {}",
                first.gyro_id,
                first.len(),
                r.gyro_id,
                r.len()
            )));
        }
    }
    let n_gyros = recordings.len() as f64;
    let averaged = (0..first.len()).map(|k| {
        let mut acc = [0.0f64; 3];
        for r in recordings {
            let s = r.samples[k].as_array();
            for a in 0..3 {
                acc[a] += s[a];
            }
        }
        AngularRate::new(acc[0] / n_gyros, acc[1] / n_gyros, acc[2] / n_gyros)
    });
    Ok(running_average_of(first.sample_rate_hz, averaged))
}

fn running_average_of(
    sample_rate_hz: f64,
    samples: impl Iterator<Item = AngularRate>,
) -> ConvergenceCurve {
    let (mut times, mut values) = (Vec::new(), Vec::new());
    let mut m = [0.0f64; 3];
    for (k, s) in samples.enumerate() {
        let sample = s.as_array();
        for a in 0..3 {
            m[a] += (sample[a] - m[a]) / (k + 1) as f64;
        }
        times.push((k + 1) as f64 / sample_rate_hz);
        values.push(AngularRate::from_array(m));
    }
    ConvergenceCurve { times, values }
}
