//! Dataset assembly: ingestion, virtual-gyro generation, windowing, splits.
//!
//! On-disk layout is a JSON manifest next to per-recording CSV files:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<brand>/<gyro_id>/recording_000.csv
//! ```
//!
//! Recording CSVs have the header `t_s,gyro_x_dps,gyro_y_dps,gyro_z_dps` and
//! one row per sample. Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces samples exactly.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::calib::{mean_first_n, window_samples};
use crate::error_model::{
    recording_noise_seed, sample_virtual_bias, simulate_stationary_recording, AngularRate,
    BiasPrior, GyroRecording, Provenance,
};
use crate::rng::{self, STREAM_BIAS, STREAM_SPLIT};
use crate::{Error, Result};

/// JSON manifest describing a dataset on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub brand: String,
    pub sample_rate_hz: f64,
    pub gyros: Vec<ManifestGyro>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_std_dps: Option<f64>,
}

/// One gyro entry: recording paths relative to the manifest, plus the
/// optional per-recording ground-truth bias in deg/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestGyro {
    pub gyro_id: String,
    pub recordings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bias_dps: Option<Vec<[f64; 3]>>,
}

/// All recordings of one gyro, in recording-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct GyroData {
    pub gyro_id: String,
    pub recordings: Vec<GyroRecording>,
    /// Known per-recording bias, carried as metadata when available.
    pub bias_dps: Option<Vec<[f64; 3]>>,
}

/// An in-memory dataset: a brand, a common sample rate, and gyros.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub brand: String,
    pub sample_rate_hz: f64,
    pub gyros: Vec<GyroData>,
}

impl Dataset {
    pub fn n_recordings(&self) -> usize {
        self.gyros.iter().map(|g| g.recordings.len()).sum()
    }

    pub fn n_samples(&self) -> usize {
        self.gyros
            .iter()
            .flat_map(|g| &g.recordings)
            .map(|r| r.len())
            .sum()
    }

    /// Flat iterator over all recordings, gyro-major.
    pub fn recordings(&self) -> impl Iterator<Item = &GyroRecording> {
        self.gyros.iter().flat_map(|g| g.recordings.iter())
    }

    fn validate_unique_ids(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for g in &self.gyros {
            if !seen.insert(g.gyro_id.as_str()) {
                return Err(Error::invalid(format!("duplicate gyro_id {:?}", g.gyro_id)));
            }
        }
        Ok(())
    }
}

/// Ground-truth bias of a recording: the per-axis mean over its full length.
pub fn ground_truth_bias(recording: &GyroRecording) -> Result<AngularRate> {
    if recording.is_empty() {
        return Err(Error::invalid("cannot take the mean of an empty recording"));
    }
    Ok(mean_first_n(recording, recording.len()))
}

const CSV_HEADER: [&str; 4] = ["t_s", "gyro_x_dps", "gyro_y_dps", "gyro_z_dps"];

/// Loads a dataset from a manifest path. Recording paths are resolved
/// relative to the manifest's directory; every file is parsed and validated
/// (header, numeric fields, strictly increasing timestamps, sample spacing
/// consistent with the manifest rate). Ingested recordings are real data.
pub fn ingest_csv(manifest_path: &Path) -> Result<Dataset> {
    let raw = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&raw).map_err(|e| Error::Parse {
        file: manifest_path.display().to_string(),
        line: e.line() as u64,
        msg: e.to_string(),
    })?;
    if !(manifest.sample_rate_hz.is_finite() && manifest.sample_rate_hz > 0.0) {
        return Err(Error::invalid(format!(
            "manifest sample rate must be positive, got {}",
            manifest.sample_rate_hz
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut gyros = Vec::with_capacity(manifest.gyros.len());
    for entry in &manifest.gyros {
        if let Some(biases) = &entry.bias_dps {
            if biases.len() != entry.recordings.len() {
                return Err(Error::invalid(format!(
                    "gyro {:?}: {} bias entries for {} recordings",
                    entry.gyro_id,
                    biases.len(),
                    entry.recordings.len()
                )));
            }
        }
        let mut recordings = Vec::with_capacity(entry.recordings.len());
        for rel in &entry.recordings {
            let path = base.join(rel);
            recordings.push(read_recording_csv(
                &path,
                &entry.gyro_id,
                manifest.sample_rate_hz,
            )?);
        }
        gyros.push(GyroData {
            gyro_id: entry.gyro_id.clone(),
            recordings,
            bias_dps: entry.bias_dps.clone(),
        });
    }
    let dataset = Dataset {
        brand: manifest.brand,
        sample_rate_hz: manifest.sample_rate_hz,
        gyros,
    };
    dataset.validate_unique_ids()?;
    Ok(dataset)
}

fn read_recording_csv(path: &Path, gyro_id: &str, sample_rate_hz: f64) -> Result<GyroRecording> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let parse_err = |line: u64, msg: String| Error::Parse {
        file: path.display().to_string(),
        line,
        msg,
    };

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(
            1,
            format!("expected header {}, got {:?}", CSV_HEADER.join(","), header),
        ));
    }

    let mut samples = Vec::new();
    let mut first_t = 0.0;
    let mut last_t = f64::NEG_INFINITY;
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 fields, got {}", record.len()),
            ));
        }
        let mut fields = [0.0f64; 4];
        for (i, raw) in record.iter().enumerate() {
            fields[i] = raw.trim().parse::<f64>().map_err(|_| {
                parse_err(
                    line,
                    format!("column {:?}: not a number: {raw:?}", CSV_HEADER[i]),
                )
            })?;
            if !fields[i].is_finite() {
                return Err(parse_err(
                    line,
                    format!("column {:?}: non-finite value", CSV_HEADER[i]),
                ));
            }
        }
        if fields[0] <= last_t {
            return Err(parse_err(
                line,
                format!(
                    "timestamps must increase, got {} after {}",
                    fields[0], last_t
                ),
            ));
        }
        if samples.is_empty() {
            first_t = fields[0];
        }
        last_t = fields[0];
        samples.push(AngularRate::new(fields[1], fields[2], fields[3]));
    }
    if samples.is_empty() {
        return Err(parse_err(1, "recording has no samples".into()));
    }
    // Sample spacing must agree with the declared rate to within 1%.
    if samples.len() >= 2 {
        let mean_dt = (last_t - first_t) / (samples.len() - 1) as f64;
        let expected = 1.0 / sample_rate_hz;
        if (mean_dt / expected - 1.0).abs() > 0.01 {
            return Err(parse_err(
                0,
                format!(
                    "mean sample spacing {mean_dt:.6} s disagrees with manifest rate {sample_rate_hz} Hz"
                ),
            ));
        }
    }
    GyroRecording::new(gyro_id, sample_rate_hz, samples, Provenance::Real, None)
}

/// Writes a dataset to `root` in the canonical layout and returns the
/// manifest path. Timestamps are `k / rate`; floats use shortest
/// round-trip formatting so ingestion reproduces the samples exactly.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<PathBuf> {
    dataset.validate_unique_ids()?;
    let mut manifest = DatasetManifest {
        brand: dataset.brand.clone(),
        sample_rate_hz: dataset.sample_rate_hz,
        gyros: Vec::new(),
        noise_std_dps: None,
    };
    for gyro in &dataset.gyros {
        let dir = root.join(&dataset.brand).join(&gyro.gyro_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut rel_paths = Vec::new();
        for (k, rec) in gyro.recordings.iter().enumerate() {
            let name = format!("recording_{k:03}.csv");
            let mut csv = String::from("t_s,gyro_x_dps,gyro_y_dps,gyro_z_dps\n");
            for (i, s) in rec.samples.iter().enumerate() {
                let t = i as f64 / rec.sample_rate_hz;
                let _ = writeln!(csv, "{},{},{},{}", t, s.x, s.y, s.z);
            }
            let path = dir.join(&name);
            std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            rel_paths.push(format!("{}/{}/{}", dataset.brand, gyro.gyro_id, name));
        }
        manifest.gyros.push(ManifestGyro {
            gyro_id: gyro.gyro_id.clone(),
            recordings: rel_paths,
            bias_dps: gyro.bias_dps.clone(),
        });
    }
    let manifest_path = root.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
    std::fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Synthesizes a dataset of virtual gyros: one bias per gyro drawn from the
/// prior, then independent stationary recordings sharing that bias.
/// Fully determined by `master_seed` (see [`crate::rng`] for the stream
/// derivation); gyro ids are `vg000`, `vg001`, …
pub fn generate_virtual_dataset(
    n_gyros: usize,
    recordings_per_gyro: usize,
    n_samples: usize,
    prior: &BiasPrior,
    noise_std: f64,
    sample_rate_hz: f64,
    master_seed: u64,
) -> Result<Dataset> {
    if n_gyros == 0 || recordings_per_gyro == 0 || n_samples == 0 {
        return Err(Error::invalid(
            "gyro, recording and sample counts must all be >= 1",
        ));
    }
    prior.validate()?;
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::invalid(format!(
            "noise std must be >= 0, got {noise_std}"
        )));
    }
    let mut gyros = Vec::with_capacity(n_gyros);
    for g in 0..n_gyros {
        let gyro_id = format!("vg{g:03}");
        let bias_seed = rng::derive_seed(
            master_seed,
            &[STREAM_BIAS, rng::fnv1a64(gyro_id.as_bytes())],
        );
        let bias = sample_virtual_bias(prior, bias_seed)?;
        let recordings = (0..recordings_per_gyro)
            .map(|k| {
                let seed = recording_noise_seed(master_seed, &gyro_id, k as u64);
                simulate_stationary_recording(
                    &gyro_id,
                    bias,
                    [noise_std; 3],
                    n_samples,
                    sample_rate_hz,
                    seed,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        gyros.push(GyroData {
            gyro_id,
            recordings,
            bias_dps: Some(vec![bias.as_array(); recordings_per_gyro]),
        });
    }
    Ok(Dataset {
        brand: "virtual".into(),
        sample_rate_hz,
        gyros,
    })
}

/// Merges a real and a virtual dataset into one training pool. Sample rates
/// must match; gyro ids must not collide; provenance is preserved. The
/// merged set keeps the real dataset's brand.
pub fn merge(real: &Dataset, virtual_set: &Dataset) -> Result<Dataset> {
    if real.sample_rate_hz != virtual_set.sample_rate_hz {
        return Err(Error::invalid(format!(
            "sample-rate mismatch: {} Hz vs {} Hz",
            real.sample_rate_hz, virtual_set.sample_rate_hz
        )));
    }
    let merged = Dataset {
        brand: real.brand.clone(),
        sample_rate_hz: real.sample_rate_hz,
        gyros: real
            .gyros
            .iter()
            .chain(&virtual_set.gyros)
            .cloned()
            .collect(),
    };
    merged.validate_unique_ids()?;
    Ok(merged)
}

/// How recordings are assigned to train and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Per-gyro seeded shuffle, `round(fraction * n)` recordings to train.
    Fraction { train_fraction: f64, seed: u64 },
    /// Explicit recording indices (applied to every gyro) that go to train.
    Explicit { train_indices: Vec<usize> },
}

/// Splits a dataset at recording granularity. Virtual recordings are never
/// placed in test ("additional training data only"); real gyros are split
/// per gyro. Errors if the test side ends up empty.
pub fn split_train_test(dataset: &Dataset, policy: &SplitPolicy) -> Result<(Dataset, Dataset)> {
    let mut train = Dataset {
        brand: dataset.brand.clone(),
        sample_rate_hz: dataset.sample_rate_hz,
        gyros: Vec::new(),
    };
    let mut test = train.clone();

    for gyro in &dataset.gyros {
        let n = gyro.recordings.len();
        let all_virtual = gyro
            .recordings
            .iter()
            .all(|r| r.provenance == Provenance::Virtual);
        if all_virtual {
            train.gyros.push(gyro.clone());
            continue;
        }
        let train_idx: BTreeSet<usize> = match policy {
            SplitPolicy::Fraction {
                train_fraction,
                seed,
            } => {
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return Err(Error::invalid(format!(
                        "train fraction must be in (0, 1), got {train_fraction}"
                    )));
                }
                if n < 2 {
                    return Err(Error::invalid(format!(
                        "gyro {:?} has {n} recording(s); need at least 2 to split",
                        gyro.gyro_id
                    )));
                }
                let n_train = (train_fraction * n as f64).round() as usize;
                if n_train == 0 || n_train == n {
                    return Err(Error::invalid(format!(
                        "fraction {train_fraction} leaves an empty split for gyro {:?}",
                        gyro.gyro_id
                    )));
                }
                let mut order: Vec<usize> = (0..n).collect();
                let mut rng = rng::stream(rng::derive_seed(
                    *seed,
                    &[STREAM_SPLIT, rng::fnv1a64(gyro.gyro_id.as_bytes())],
                ));
                order.shuffle(&mut rng);
                order[..n_train].iter().copied().collect()
            }
            SplitPolicy::Explicit { train_indices } => {
                let idx: BTreeSet<usize> = train_indices.iter().copied().collect();
                if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                    return Err(Error::invalid(format!(
                        "train index {bad} out of range for gyro {:?} with {n} recordings",
                        gyro.gyro_id
                    )));
                }
                idx
            }
        };
        let mut tr = GyroData {
            gyro_id: gyro.gyro_id.clone(),
            recordings: Vec::new(),
            bias_dps: gyro.bias_dps.as_ref().map(|_| Vec::new()),
        };
        let mut te = tr.clone();
        for (k, rec) in gyro.recordings.iter().enumerate() {
            let to_train = train_idx.contains(&k) || rec.provenance == Provenance::Virtual;
            let side = if to_train { &mut tr } else { &mut te };
            side.recordings.push(rec.clone());
            if let (Some(all), Some(dst)) = (&gyro.bias_dps, &mut side.bias_dps) {
                dst.push(all[k]);
            }
        }
        if !tr.recordings.is_empty() {
            train.gyros.push(tr);
        }
        if !te.recordings.is_empty() {
            test.gyros.push(te);
        }
    }
    if test.n_recordings() == 0 {
        return Err(Error::invalid("split produced an empty test set"));
    }
    if train.n_recordings() == 0 {
        return Err(Error::invalid("split produced an empty train set"));
    }
    Ok((train, test))
}

/// How recordings map to network input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// One 3-channel example per gyro per recording (more examples).
    PerImu3Ch,
    /// One 3N-channel example per synchronized recording group (more channels).
    Stacked3NCh,
}

/// One network input: a fixed-length multi-channel window with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub channels: usize,
    pub window_len: usize,
    /// Channel-major samples: `window[c * window_len + t]`.
    pub window: Vec<f64>,
    /// Ground-truth bias per channel (deg/s).
    pub label: Vec<f64>,
    /// Gyro ids contributing channels, in channel order.
    pub source_gyros: Vec<String>,
    pub recording_index: usize,
}

/// Cuts training examples out of a dataset.
///
/// Windows always start at sample 0 of each recording (calibration happens
/// at power-on) and are `round(window_s * rate)` samples long; labels are
/// the full-recording ground-truth bias. Channel order is gyro-major,
/// axis-minor (g1x g1y g1z g2x …). `gyro_subset` restricts and orders the
/// participating gyros; `None` means all gyros in dataset order. Stacked
/// mode aligns the k-th recording of every participating gyro and requires
/// equal recording counts and equal lengths within each group.
pub fn make_windows(
    dataset: &Dataset,
    window_s: f64,
    mode: ChannelMode,
    gyro_subset: Option<&[String]>,
) -> Result<Vec<TrainingExample>> {
    let selected: Vec<&GyroData> = match gyro_subset {
        None => dataset.gyros.iter().collect(),
        Some(ids) => ids
            .iter()
            .map(|id| {
                dataset
                    .gyros
                    .iter()
                    .find(|g| &g.gyro_id == id)
                    .ok_or_else(|| Error::invalid(format!("gyro {id:?} not in dataset")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if selected.is_empty() {
        return Err(Error::invalid("no gyros selected for windowing"));
    }

    let mut examples = Vec::new();
    match mode {
        ChannelMode::PerImu3Ch => {
            for gyro in &selected {
                for (k, rec) in gyro.recordings.iter().enumerate() {
                    let s = window_samples(rec, window_s)?;
                    let gt = ground_truth_bias(rec)?;
                    let mut window = Vec::with_capacity(3 * s);
                    for a in 0..3 {
                        window.extend(rec.samples[..s].iter().map(|smp| smp.axis(a)));
                    }
                    examples.push(TrainingExample {
                        channels: 3,
                        window_len: s,
                        window,
                        label: gt.as_array().to_vec(),
                        source_gyros: vec![gyro.gyro_id.clone()],
                        recording_index: k,
                    });
                }
            }
        }
        ChannelMode::Stacked3NCh => {
            let n_rec = selected[0].recordings.len();
            if let Some(bad) = selected.iter().find(|g| g.recordings.len() != n_rec) {
                return Err(Error::invalid(format!(
                    "stacked mode needs equal recording counts; {:?} has {}, {:?} has {}",
                    selected[0].gyro_id,
                    n_rec,
                    bad.gyro_id,
                    bad.recordings.len()
                )));
            }
            for k in 0..n_rec {
                let group: Vec<&GyroRecording> =
                    selected.iter().map(|g| &g.recordings[k]).collect();
                let len0 = group[0].len();
                if let Some(bad) = group.iter().find(|r| r.len() != len0) {
                    return Err(Error::invalid(format!(
                        "recording group {k}: {:?} has {} samples, {:?} has {}",
                        group[0].gyro_id,
                        len0,
                        bad.gyro_id,
                        bad.len()
                    )));
                }
                let s = window_samples(group[0], window_s)?;
                let mut window = Vec::with_capacity(3 * group.len() * s);
                let mut label = Vec::with_capacity(3 * group.len());
                for rec in &group {
                    let gt = ground_truth_bias(rec)?;
                    for a in 0..3 {
                        window.extend(rec.samples[..s].iter().map(|smp| smp.axis(a)));
                        label.push(gt.axis(a));
                    }
                }
                examples.push(TrainingExample {
                    channels: 3 * group.len(),
                    window_len: s,
                    window,
                    label,
                    source_gyros: group.iter().map(|r| r.gyro_id.clone()).collect(),
                    recording_index: k,
                });
            }
        }
    }
    Ok(examples)
}
