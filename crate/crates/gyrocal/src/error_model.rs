//! Gyroscope measurement error model and stationary-recording simulation.
//!
//! A gyro observes `w~ = M * w + b + n` where `M` is a scale/misalignment
//! matrix, `b` a constant bias and `n` zero-mean white Gaussian noise. For a
//! stationary recording `w = 0`, so samples reduce to bias plus noise; that
//! is the regime both the averaging baseline and the network operate in.

use serde::{Deserialize, Serialize};

use crate::rng::{self, GaussianStream, STREAM_RECORDING};
use crate::{Error, Result};

/// 3-axis angular rate in deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngularRate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AngularRate {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AngularRate { x, y, z }
    }

    pub fn zero() -> Self {
        AngularRate::default()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        AngularRate::new(a[0], a[1], a[2])
    }

    /// Component by axis index (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for AngularRate {
    type Output = AngularRate;
    fn add(self, o: AngularRate) -> AngularRate {
        AngularRate::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for AngularRate {
    type Output = AngularRate;
    fn sub(self, o: AngularRate) -> AngularRate {
        AngularRate::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Full measurement model: scale/misalignment matrix, bias and per-axis
/// noise standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelParams {
    /// Row-major scale/misalignment matrix applied to the true rate.
    pub m_matrix: [[f64; 3]; 3],
    /// Constant bias (deg/s).
    pub bias: AngularRate,
    /// Per-axis noise standard deviation (deg/s).
    pub noise_std: [f64; 3],
}

impl ErrorModelParams {
    /// Identity scaling, zero bias, zero noise.
    pub fn identity() -> Self {
        ErrorModelParams {
            m_matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            bias: AngularRate::zero(),
            noise_std: [0.0; 3],
        }
    }

    /// Bias-and-noise-only model (identity scaling), the virtual-gyro case.
    pub fn bias_noise(bias: AngularRate, noise_std: f64) -> Self {
        ErrorModelParams {
            bias,
            noise_std: [noise_std; 3],
            ..ErrorModelParams::identity()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bias.is_finite() {
            return Err(Error::invalid("error model bias must be finite"));
        }
        for row in &self.m_matrix {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("error model matrix must be finite"));
            }
        }
        for &s in &self.noise_std {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::invalid(format!(
                    "noise std must be finite and non-negative, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Prior distribution over virtual-gyro biases, per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasPrior {
    Uniform { lo: [f64; 3], hi: [f64; 3] },
    Gaussian { mean: [f64; 3], std: [f64; 3] },
}

impl BiasPrior {
    /// Uniform prior with the same symmetric range on every axis.
    pub fn uniform_symmetric(half_width: f64) -> Self {
        BiasPrior::Uniform {
            lo: [-half_width; 3],
            hi: [half_width; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BiasPrior::Uniform { lo, hi } => {
                for a in 0..3 {
                    if !lo[a].is_finite() || !hi[a].is_finite() || lo[a] > hi[a] {
                        return Err(Error::invalid(format!(
                            "uniform prior needs lo <= hi, axis {a} has [{}, {}]",
                            lo[a], hi[a]
                        )));
                    }
                }
            }
            BiasPrior::Gaussian { mean, std } => {
                for a in 0..3 {
                    if !mean[a].is_finite() || !std[a].is_finite() || std[a] < 0.0 {
                        return Err(Error::invalid(format!(
                            "gaussian prior needs finite mean and std >= 0, axis {a}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Where a recording came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Virtual,
}

/// A stationary recording from one 3-axis gyro unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GyroRecording {
    pub gyro_id: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<AngularRate>,
    pub provenance: Provenance,
    /// Stream seed for virtual recordings, `None` for ingested data.
    pub seed: Option<u64>,
}

impl GyroRecording {
    /// Validating constructor; rejects empty data, non-positive rates and
    /// non-finite samples.
    pub fn new(
        gyro_id: impl Into<String>,
        sample_rate_hz: f64,
        samples: Vec<AngularRate>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::invalid("recording must contain at least one sample"));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {k}")));
        }
        Ok(GyroRecording {
            gyro_id: gyro_id.into(),
            sample_rate_hz,
            samples,
            provenance,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Applies the measurement model to a sequence of true rates.
///
/// Noise is drawn from three per-axis streams derived from `seed` as
/// `derive_seed(seed, &[axis])`; see [`crate::rng`] for the full rule.
pub fn apply_error_model(
    true_rates: &[AngularRate],
    params: &ErrorModelParams,
    seed: u64,
) -> Result<Vec<AngularRate>> {
    params.validate()?;
    let mut streams = axis_streams(seed);
    let m = &params.m_matrix;
    let out = true_rates
        .iter()
        .map(|w| {
            let rotated = AngularRate::new(
                m[0][0] * w.x + m[0][1] * w.y + m[0][2] * w.z,
                m[1][0] * w.x + m[1][1] * w.y + m[1][2] * w.z,
                m[2][0] * w.x + m[2][1] * w.y + m[2][2] * w.z,
            );
            let noise = AngularRate::new(
                params.noise_std[0] * streams[0].next_standard(),
                params.noise_std[1] * streams[1].next_standard(),
                params.noise_std[2] * streams[2].next_standard(),
            );
            rotated + params.bias + noise
        })
        .collect();
    Ok(out)
}

/// Simulates a stationary recording: bias plus white Gaussian noise.
///
/// `recording_seed` is the per-recording stream seed; dataset-level code
/// derives it from a master seed per the rule in [`crate::rng`].
pub fn simulate_stationary_recording(
    gyro_id: &str,
    bias: AngularRate,
    noise_std: [f64; 3],
    n_samples: usize,
    sample_rate_hz: f64,
    recording_seed: u64,
) -> Result<GyroRecording> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let params = ErrorModelParams {
        bias,
        noise_std,
        ..ErrorModelParams::identity()
    };
    params.validate()?;
    let mut streams = axis_streams(recording_seed);
    let samples = (0..n_samples)
        .map(|_| {
            AngularRate::new(
                bias.x + noise_std[0] * streams[0].next_standard(),
                bias.y + noise_std[1] * streams[1].next_standard(),
                bias.z + noise_std[2] * streams[2].next_standard(),
            )
        })
        .collect();
    GyroRecording::new(
        gyro_id,
        sample_rate_hz,
        samples,
        Provenance::Virtual,
        Some(recording_seed),
    )
}

/// Draws one bias vector from the prior. Axes consume the stream in x, y, z
/// order; the stream seed is derived per the rule in [`crate::rng`].
pub fn sample_virtual_bias(prior: &BiasPrior, seed: u64) -> Result<AngularRate> {
    prior.validate()?;
    match prior {
        BiasPrior::Uniform { lo, hi } => {
            use rand::RngCore;
            let mut rng = rng::stream(seed);
            let mut draw = |a: usize| {
                let u = rng::unit_open_closed(rng.next_u64());
                lo[a] + (hi[a] - lo[a]) * u
            };
            Ok(AngularRate::new(draw(0), draw(1), draw(2)))
        }
        BiasPrior::Gaussian { mean, std } => {
            let mut g = GaussianStream::new(seed);
            let mut draw = |a: usize| mean[a] + std[a] * g.next_standard();
            Ok(AngularRate::new(draw(0), draw(1), draw(2)))
        }
    }
}

/// Subtracts a bias estimate from every sample (the calibration step).
pub fn calibrate(recording: &GyroRecording, bias_estimate: AngularRate) -> Result<GyroRecording> {
    if !bias_estimate.is_finite() {
        return Err(Error::invalid("bias estimate must be finite"));
    }
    let samples = recording
        .samples
        .iter()
        .map(|&s| s - bias_estimate)
        .collect();
    GyroRecording::new(
        recording.gyro_id.clone(),
        recording.sample_rate_hz,
        samples,
        recording.provenance,
        recording.seed,
    )
}

/// Seed for the noise streams of one recording of one gyro.
pub fn recording_noise_seed(master_seed: u64, gyro_id: &str, recording_index: u64) -> u64 {
    rng::derive_seed(
        master_seed,
        &[
            STREAM_RECORDING,
            rng::fnv1a64(gyro_id.as_bytes()),
            recording_index,
        ],
    )
}

fn axis_streams(seed: u64) -> [GaussianStream; 3] {
    [
        GaussianStream::new(rng::derive_seed(seed, &[0])),
        GaussianStream::new(rng::derive_seed(seed, &[1])),
        GaussianStream::new(rng::derive_seed(seed, &[2])),
    ]
}
