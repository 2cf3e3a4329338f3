//! Experiment specs: a single JSON file describing data sources, windows,
//! network and training settings, and the output directory. Command line
//! flags override individual fields; the resolved spec is frozen into the
//! run directory so any run can be reproduced from that copy alone.

use std::fs;
use std::path::{Path, PathBuf};

use gyrocal::error_model::BiasPrior;
use gyrocal::nn::{NetworkConfig, TrainConfig};
use gyrocal::{Error, Result};
use serde::{Deserialize, Serialize};

/// How train and test data are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// Train and test on disjoint recordings of the same real gyros.
    #[serde(rename = "real2real")]
    Real2Real,
    /// Real training recordings augmented with virtual gyros; the test
    /// side stays real.
    #[serde(rename = "real_plus_virtual2real")]
    RealPlusVirtual2Real,
    /// One model over all gyros at once, channels stacked and recordings
    /// aligned by index.
    #[serde(rename = "stacked_channels")]
    StackedChannels,
}

/// Parameters for generating virtual stationary recordings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualGen {
    pub n_gyros: usize,
    pub recordings_per_gyro: usize,
    pub n_samples: usize,
    pub prior: BiasPrior,
    pub noise_std_dps: f64,
    pub sample_rate_hz: f64,
}

impl VirtualGen {
    pub fn validate(&self) -> Result<()> {
        if self.n_gyros == 0 || self.recordings_per_gyro == 0 || self.n_samples == 0 {
            return Err(Error::invalid(
                "virtual_gen: gyro, recording and sample counts must all be >= 1",
            ));
        }
        if !(self.noise_std_dps.is_finite() && self.noise_std_dps >= 0.0) {
            return Err(Error::invalid(format!(
                "virtual_gen: noise std must be >= 0, got {}",
                self.noise_std_dps
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "virtual_gen: sample rate must be > 0, got {}",
                self.sample_rate_hz
            )));
        }
        self.prior.validate()
    }
}

/// Architecture knobs. Input and output channel counts and the window
/// length come from the data, so they are not part of the spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSpec {
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub conv_stride: usize,
    pub leaky_slope: f64,
    pub pool_size: usize,
    pub hidden_dim: usize,
}

impl Default for NetSpec {
    fn default() -> Self {
        NetSpec {
            conv_filters: 16,
            kernel_size: 7,
            conv_stride: 1,
            leaky_slope: 0.1,
            pool_size: 4,
            hidden_dim: 64,
        }
    }
}

impl NetSpec {
    pub fn to_config(&self, in_channels: usize, window_len: usize) -> NetworkConfig {
        NetworkConfig {
            in_channels,
            window_len,
            conv_filters: self.conv_filters,
            kernel_size: self.kernel_size,
            conv_stride: self.conv_stride,
            leaky_slope: self.leaky_slope,
            pool_size: self.pool_size,
            hidden_dim: self.hidden_dim,
            out_dim: in_channels,
        }
    }
}

/// One experiment, fully described by a JSON file plus a master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub protocol: Protocol,
    /// Manifest of a recorded dataset. Required by every protocol that
    /// touches real data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Virtual generation parameters. Required by `simulate` and by the
    /// real_plus_virtual2real protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_gen: Option<VirtualGen>,
    /// Calibration window lengths in seconds, one trained model each.
    pub window_s: Vec<f64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Gyro ids participating in the stacked_channels protocol; omit for
    /// all gyros in manifest order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_gyros: Option<Vec<String>>,
    #[serde(default)]
    pub net: NetSpec,
    #[serde(default)]
    pub train: TrainConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn default_train_fraction() -> f64 {
    0.75
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    /// Applies command line overrides, pins the training seed to the
    /// master seed, and validates the result.
    pub fn resolve(
        mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        window_s: &[f64],
    ) -> Result<Self> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.out_dir = out;
        }
        if !window_s.is_empty() {
            self.window_s = window_s.to_vec();
        }
        self.train.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_s.is_empty() {
            return Err(Error::invalid(
                "window_s: at least one window length is required",
            ));
        }
        for &w in &self.window_s {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "window_s: lengths must be > 0, got {w}"
                )));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if self.stack_gyros.is_some() && self.protocol != Protocol::StackedChannels {
            return Err(Error::invalid(
                "stack_gyros only applies to the stacked_channels protocol",
            ));
        }
        if let Some(gen) = &self.virtual_gen {
            gen.validate()?;
        }
        self.train.validate()
    }

    pub fn require_manifest(&self) -> Result<&Path> {
        self.manifest.as_deref().ok_or_else(|| {
            Error::invalid(format!(
                "protocol {:?} needs a manifest path",
                self.protocol
            ))
        })
    }

    pub fn require_virtual_gen(&self) -> Result<&VirtualGen> {
        self.virtual_gen
            .as_ref()
            .ok_or_else(|| Error::invalid("this command needs the virtual_gen section"))
    }

    pub fn frozen_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("spec serialization failed: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Writes the resolved spec into the run directory. If a frozen copy
    /// already exists it must match byte for byte, so artifacts from an
    /// earlier run with different settings cannot be silently mixed in.
    pub fn write_frozen(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let path = self.out_dir.join("spec.resolved.json");
        let text = self.frozen_json()?;
        if path.exists() {
            let existing = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            if existing != text {
                return Err(Error::invalid(format!(
                    "{} differs from the current settings; use a fresh output directory \
                     or matching flags",
                    path.display()
                )));
            }
            return Ok(path);
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
