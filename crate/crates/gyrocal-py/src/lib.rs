//! Python bindings for the gyrocal toolkit.
//!
//! Exposes recordings, datasets, bias priors and the bias regression
//! network as Python classes, plus the calibration and evaluation
//! routines as functions. Angular rates cross the boundary as
//! `(x, y, z)` tuples in deg/s; windows as lists of per-channel sample
//! lists. Build with the `extension-module` feature to get an importable
//! `gyrocal_py` module.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gyrocal::dataset::{self, ChannelMode, SplitPolicy};
use gyrocal::error_model::{self, AngularRate};
use gyrocal::nn::{self, NetworkConfig, NetworkParams, TrainConfig};
use gyrocal::{calib, eval, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::Internal(_) | Error::NonFiniteLoss { .. } => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn rate_to_tuple(rate: AngularRate) -> (f64, f64, f64) {
    (rate.x, rate.y, rate.z)
}

fn tuple_to_rate(t: (f64, f64, f64)) -> AngularRate {
    AngularRate::new(t.0, t.1, t.2)
}

/// One stationary recording of a single gyro.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Recording {
    inner: error_model::GyroRecording,
}

#[pymethods]
impl Recording {
    /// Builds a recording from raw samples in deg/s.
    #[staticmethod]
    fn from_samples(
        gyro_id: &str,
        sample_rate_hz: f64,
        samples: Vec<(f64, f64, f64)>,
    ) -> PyResult<Self> {
        let samples = samples.into_iter().map(tuple_to_rate).collect();
        let inner = error_model::GyroRecording::new(
            gyro_id,
            sample_rate_hz,
            samples,
            error_model::Provenance::Real,
            None,
        )
        .map_err(to_py)?;
        Ok(Recording { inner })
    }

    #[getter]
    fn gyro_id(&self) -> String {
        self.inner.gyro_id.clone()
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.sample_rate_hz
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn duration_s(&self) -> f64 {
        self.inner.duration_s()
    }

    fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .samples
            .iter()
            .copied()
            .map(rate_to_tuple)
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Recording(gyro_id='{}', samples={}, rate={} Hz)",
            self.inner.gyro_id,
            self.inner.len(),
            self.inner.sample_rate_hz
        )
    }
}

/// Prior over the per-recording turn-on bias.
#[pyclass(name = "BiasPrior", skip_from_py_object)]
#[derive(Clone)]
struct PyBiasPrior {
    inner: error_model::BiasPrior,
}

#[pymethods]
impl PyBiasPrior {
    #[staticmethod]
    fn uniform(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> PyResult<Self> {
        let inner = error_model::BiasPrior::Uniform {
            lo: [lo.0, lo.1, lo.2],
            hi: [hi.0, hi.1, hi.2],
        };
        inner.validate().map_err(to_py)?;
        Ok(PyBiasPrior { inner })
    }

    /// Uniform on `[-half_width, half_width]` per axis.
    #[staticmethod]
    fn uniform_symmetric(half_width: f64) -> PyResult<Self> {
        let inner = error_model::BiasPrior::uniform_symmetric(half_width);
        inner.validate().map_err(to_py)?;
        Ok(PyBiasPrior { inner })
    }

    #[staticmethod]
    fn gaussian(mean: (f64, f64, f64), std: (f64, f64, f64)) -> PyResult<Self> {
        let inner = error_model::BiasPrior::Gaussian {
            mean: [mean.0, mean.1, mean.2],
            std: [std.0, std.1, std.2],
        };
        inner.validate().map_err(to_py)?;
        Ok(PyBiasPrior { inner })
    }

    fn __repr__(&self) -> String {
        format!("BiasPrior({:?})", self.inner)
    }
}

/// A brand of gyros with their stationary recordings.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl Dataset {
    #[getter]
    fn brand(&self) -> String {
        self.inner.brand.clone()
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.sample_rate_hz
    }

    fn n_recordings(&self) -> usize {
        self.inner.n_recordings()
    }

    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    fn gyro_ids(&self) -> Vec<String> {
        self.inner.gyros.iter().map(|g| g.gyro_id.clone()).collect()
    }

    fn recording(&self, gyro_id: &str, index: usize) -> PyResult<Recording> {
        let gyro = self
            .inner
            .gyros
            .iter()
            .find(|g| g.gyro_id == gyro_id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown gyro_id {gyro_id:?}")))?;
        let inner = gyro.recordings.get(index).cloned().ok_or_else(|| {
            PyValueError::new_err(format!(
                "gyro {gyro_id:?} has {} recordings, index {index} is out of range",
                gyro.recordings.len()
            ))
        })?;
        Ok(Recording { inner })
    }

    /// Writes the dataset in the canonical CSV layout and returns the
    /// manifest path.
    fn write(&self, root: PathBuf) -> PyResult<String> {
        let manifest = dataset::write_dataset(&self.inner, &root).map_err(to_py)?;
        Ok(manifest.display().to_string())
    }

    fn merge(&self, other: &Dataset) -> PyResult<Dataset> {
        let inner = dataset::merge(&self.inner, &other.inner).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    /// Seeded per-gyro split; virtual gyros go to the train side whole.
    fn split(&self, train_fraction: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
        let policy = SplitPolicy::Fraction {
            train_fraction,
            seed,
        };
        let (train, test) = dataset::split_train_test(&self.inner, &policy).map_err(to_py)?;
        Ok((Dataset { inner: train }, Dataset { inner: test }))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(brand='{}', gyros={}, recordings={})",
            self.inner.brand,
            self.inner.gyros.len(),
            self.inner.n_recordings()
        )
    }
}

/// The trained bias regression network.
#[pyclass]
struct BiasNet {
    config: NetworkConfig,
    params: NetworkParams,
    seed: u64,
}

impl BiasNet {
    fn mode(&self) -> ChannelMode {
        if self.config.in_channels == 3 {
            ChannelMode::PerImu3Ch
        } else {
            ChannelMode::Stacked3NCh
        }
    }
}

#[pymethods]
impl BiasNet {
    /// Trains a network on windows cut from `dataset` and returns it
    /// together with the per-epoch training losses.
    #[staticmethod]
    #[pyo3(signature = (dataset, window_s, *, stacked = false,
        conv_filters = 16, kernel_size = 7, conv_stride = 1,
        leaky_slope = 0.1, pool_size = 4, hidden_dim = 64,
        batch_size = 64, learning_rate = 1e-4, lr_decay_factor = 0.1,
        lr_decay_every = 200, epochs = 1200, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        dataset: &Dataset,
        window_s: f64,
        stacked: bool,
        conv_filters: usize,
        kernel_size: usize,
        conv_stride: usize,
        leaky_slope: f64,
        pool_size: usize,
        hidden_dim: usize,
        batch_size: usize,
        learning_rate: f64,
        lr_decay_factor: f64,
        lr_decay_every: usize,
        epochs: usize,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let mode = if stacked {
            ChannelMode::Stacked3NCh
        } else {
            ChannelMode::PerImu3Ch
        };
        let examples =
            dataset::make_windows(&dataset.inner, window_s, mode, None).map_err(to_py)?;
        let first = examples
            .first()
            .ok_or_else(|| PyValueError::new_err("no training windows"))?;
        let config = NetworkConfig {
            in_channels: first.channels,
            window_len: first.window_len,
            conv_filters,
            kernel_size,
            conv_stride,
            leaky_slope,
            pool_size,
            hidden_dim,
            out_dim: first.channels,
        };
        let train_config = TrainConfig {
            batch_size,
            learning_rate,
            lr_decay_factor,
            lr_decay_every,
            epochs,
            seed,
            ..TrainConfig::default()
        };
        let report = nn::train(&examples, &config, &train_config).map_err(to_py)?;
        let net = BiasNet {
            config,
            params: report.params,
            seed,
        };
        Ok((net, report.losses))
    }

    #[getter]
    fn in_channels(&self) -> usize {
        self.config.in_channels
    }

    #[getter]
    fn window_len(&self) -> usize {
        self.config.window_len
    }

    /// Predicted bias for one window, given as per-channel sample lists.
    fn predict(&self, window: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        if window.len() != self.config.in_channels {
            return Err(PyValueError::new_err(format!(
                "expected {} channels, got {}",
                self.config.in_channels,
                window.len()
            )));
        }
        let mut flat = Vec::with_capacity(self.config.in_channels * self.config.window_len);
        for (c, channel) in window.iter().enumerate() {
            if channel.len() != self.config.window_len {
                return Err(PyValueError::new_err(format!(
                    "channel {c} has {} samples, expected {}",
                    channel.len(),
                    self.config.window_len
                )));
            }
            flat.extend_from_slice(channel);
        }
        nn::forward(&self.params, &self.config, &flat).map_err(to_py)
    }

    /// Pooled bias RMSE over all windows cut from `dataset`.
    fn rmse_on(&self, dataset: &Dataset, window_s: f64) -> PyResult<f64> {
        eval::nn_rmse_at_window(
            &self.params,
            &self.config,
            &dataset.inner,
            window_s,
            self.mode(),
            None,
        )
        .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        nn::save_checkpoint(&path, &self.config, &self.params, self.seed).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (config, params, seed) = nn::load_checkpoint(&path).map_err(to_py)?;
        Ok(BiasNet {
            config,
            params,
            seed,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "BiasNet(in_channels={}, window_len={}, params={})",
            self.config.in_channels,
            self.config.window_len,
            self.config.n_params()
        )
    }
}

/// Simulates one stationary recording: constant bias plus white noise.
#[pyfunction]
fn simulate_stationary_recording(
    gyro_id: &str,
    bias: (f64, f64, f64),
    noise_std: (f64, f64, f64),
    n_samples: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> PyResult<Recording> {
    let inner = error_model::simulate_stationary_recording(
        gyro_id,
        tuple_to_rate(bias),
        [noise_std.0, noise_std.1, noise_std.2],
        n_samples,
        sample_rate_hz,
        seed,
    )
    .map_err(to_py)?;
    Ok(Recording { inner })
}

/// Generates virtual gyros with biases drawn from `prior`.
#[pyfunction]
fn generate_virtual_dataset(
    n_gyros: usize,
    recordings_per_gyro: usize,
    n_samples: usize,
    prior: &PyBiasPrior,
    noise_std_dps: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> PyResult<Dataset> {
    let inner = dataset::generate_virtual_dataset(
        n_gyros,
        recordings_per_gyro,
        n_samples,
        &prior.inner,
        noise_std_dps,
        sample_rate_hz,
        seed,
    )
    .map_err(to_py)?;
    Ok(Dataset { inner })
}

/// Loads a dataset from its manifest, validating layout and timing.
#[pyfunction]
fn ingest_csv(manifest_path: PathBuf) -> PyResult<Dataset> {
    let inner = dataset::ingest_csv(&manifest_path).map_err(to_py)?;
    Ok(Dataset { inner })
}

/// Mean over the first `window_s` seconds, the zero-order bias estimate.
#[pyfunction]
fn zero_order_bias(recording: &Recording, window_s: f64) -> PyResult<(f64, f64, f64)> {
    calib::zero_order_bias(&recording.inner, window_s)
        .map(rate_to_tuple)
        .map_err(to_py)
}

/// Full-recording mean, the reference the estimators are scored against.
#[pyfunction]
fn ground_truth_bias(recording: &Recording) -> PyResult<(f64, f64, f64)> {
    dataset::ground_truth_bias(&recording.inner)
        .map(rate_to_tuple)
        .map_err(to_py)
}

/// Running mean over growing windows; returns (times, estimates).
#[pyfunction]
fn running_average_curve(recording: &Recording) -> (Vec<f64>, Vec<(f64, f64, f64)>) {
    let curve = calib::running_average_curve(&recording.inner);
    let values = curve.values.into_iter().map(rate_to_tuple).collect();
    (curve.times, values)
}

/// Bias RMSE of the running average over a test set; returns (times, rmse).
#[pyfunction]
fn model_based_rmse_curve(dataset: &Dataset) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let recordings: Vec<_> = dataset.inner.recordings().collect();
    let curve = eval::model_based_rmse_curve(&recordings).map_err(to_py)?;
    Ok((curve.times, curve.rmse))
}

/// First time a strictly sampled RMSE curve reaches `target`, or None.
#[pyfunction]
fn crossing_time(times: Vec<f64>, rmse: Vec<f64>, target: f64) -> PyResult<Option<f64>> {
    if times.len() != rmse.len() {
        return Err(PyValueError::new_err("times and rmse lengths differ"));
    }
    let curve = eval::RmseCurve { times, rmse };
    Ok(eval::crossing_time(&curve, target))
}

/// Compares a network RMSE at one window against the running-average
/// curve; returns the report as a dict.
#[pyfunction]
fn improvement_report<'py>(
    py: Python<'py>,
    window_s: f64,
    nn_rmse: f64,
    times: Vec<f64>,
    rmse: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let curve = eval::RmseCurve { times, rmse };
    let report = eval::improvement_report(window_s, nn_rmse, &curve).map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item("window_s", report.window_s)?;
    dict.set_item("nn_rmse_dps", report.nn_rmse_dps)?;
    dict.set_item(
        "model_based_rmse_at_window_dps",
        report.model_based_rmse_at_window_dps,
    )?;
    dict.set_item("crossing_time_s", report.crossing_time_s)?;
    dict.set_item("time_improvement_pct", report.time_improvement_pct)?;
    dict.set_item("accuracy_improvement_pct", report.accuracy_improvement_pct)?;
    Ok(dict)
}

/// Posterior mean of the bias given a window and a known noise level.
#[pyfunction]
fn bayes_posterior_mean(
    window: Vec<(f64, f64, f64)>,
    noise_std: f64,
    prior: &PyBiasPrior,
) -> PyResult<(f64, f64, f64)> {
    let window: Vec<AngularRate> = window.into_iter().map(tuple_to_rate).collect();
    eval::bayes_posterior_mean(&window, noise_std, &prior.inner)
        .map(rate_to_tuple)
        .map_err(to_py)
}

#[pymodule]
fn gyrocal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Recording>()?;
    m.add_class::<PyBiasPrior>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<BiasNet>()?;
    m.add_function(wrap_pyfunction!(simulate_stationary_recording, m)?)?;
    m.add_function(wrap_pyfunction!(generate_virtual_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(ingest_csv, m)?)?;
    m.add_function(wrap_pyfunction!(zero_order_bias, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth_bias, m)?)?;
    m.add_function(wrap_pyfunction!(running_average_curve, m)?)?;
    m.add_function(wrap_pyfunction!(model_based_rmse_curve, m)?)?;
    m.add_function(wrap_pyfunction!(crossing_time, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_report, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_posterior_mean, m)?)?;
    Ok(())
}
