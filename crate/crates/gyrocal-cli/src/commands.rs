//! Subcommand implementations. Every command takes the resolved spec;
//! simulate, train and eval write only inside `spec.out_dir`, ingest and
//! compare write nothing.

use std::fs;
use std::path::PathBuf;

use gyrocal::dataset::{
    generate_virtual_dataset, ingest_csv, make_windows, merge, split_train_test, write_dataset,
    ChannelMode, Dataset, SplitPolicy,
};
use gyrocal::error_model::GyroRecording;
use gyrocal::eval::{
    improvement_report, model_based_rmse_curve, nn_rmse_at_window, render_table, ComparisonReport,
};
use gyrocal::nn::{load_checkpoint, save_checkpoint, train, write_train_log};
use gyrocal::rng::{derive_seed, stream, STREAM_SPLIT};
use gyrocal::{Error, Result};
use rand::seq::SliceRandom;

use crate::spec::{ExperimentSpec, Protocol};

/// Train and test sides plus the windowing mode they share.
struct PreparedData {
    train: Dataset,
    test: Dataset,
    mode: ChannelMode,
    stack_gyros: Option<Vec<String>>,
}

fn load_real(spec: &ExperimentSpec) -> Result<Dataset> {
    ingest_csv(spec.require_manifest()?)
}

fn hours(dataset: &Dataset) -> f64 {
    dataset.n_samples() as f64 / dataset.sample_rate_hz / 3600.0
}

/// Assembles train and test sets according to the protocol. Everything
/// downstream of the spec and master seed is deterministic, so train and
/// eval can call this independently and see the same split.
fn prepare_data(spec: &ExperimentSpec) -> Result<PreparedData> {
    match spec.protocol {
        Protocol::Real2Real => {
            let real = load_real(spec)?;
            let policy = SplitPolicy::Fraction {
                train_fraction: spec.train_fraction,
                seed: spec.seed,
            };
            let (train, test) = split_train_test(&real, &policy)?;
            Ok(PreparedData {
                train,
                test,
                mode: ChannelMode::PerImu3Ch,
                stack_gyros: None,
            })
        }
        Protocol::RealPlusVirtual2Real => {
            let real = load_real(spec)?;
            let gen = spec.require_virtual_gen()?;
            if gen.sample_rate_hz != real.sample_rate_hz {
                return Err(Error::invalid(format!(
                    "virtual sample rate {} Hz does not match the dataset rate {} Hz",
                    gen.sample_rate_hz, real.sample_rate_hz
                )));
            }
            let virt = generate_virtual_dataset(
                gen.n_gyros,
                gen.recordings_per_gyro,
                gen.n_samples,
                &gen.prior,
                gen.noise_std_dps,
                gen.sample_rate_hz,
                spec.seed,
            )?;
            let merged = merge(&real, &virt)?;
            let policy = SplitPolicy::Fraction {
                train_fraction: spec.train_fraction,
                seed: spec.seed,
            };
            let (train, test) = split_train_test(&merged, &policy)?;
            Ok(PreparedData {
                train,
                test,
                mode: ChannelMode::PerImu3Ch,
                stack_gyros: None,
            })
        }
        Protocol::StackedChannels => {
            let real = load_real(spec)?;
            // Stacking aligns the k-th recording of every gyro, so one
            // shared index split keeps simultaneous recordings together.
            let n = real
                .gyros
                .first()
                .map(|g| g.recordings.len())
                .ok_or_else(|| Error::invalid("dataset has no gyros"))?;
            if real.gyros.iter().any(|g| g.recordings.len() != n) {
                return Err(Error::invalid(
                    "stacked_channels needs the same recording count for every gyro",
                ));
            }
            let n_train = (spec.train_fraction * n as f64).round() as usize;
            if n < 2 || n_train == 0 || n_train >= n {
                return Err(Error::invalid(format!(
                    "cannot split {n} recordings per gyro with train fraction {}",
                    spec.train_fraction
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream(derive_seed(spec.seed, &[STREAM_SPLIT])));
            let mut train_indices = order[..n_train].to_vec();
            train_indices.sort_unstable();
            let (train, test) = split_train_test(&real, &SplitPolicy::Explicit { train_indices })?;
            Ok(PreparedData {
                train,
                test,
                mode: ChannelMode::Stacked3NCh,
                stack_gyros: spec.stack_gyros.clone(),
            })
        }
    }
}

pub fn cmd_simulate(spec: &ExperimentSpec) -> Result<()> {
    let gen = spec.require_virtual_gen()?;
    let dataset = generate_virtual_dataset(
        gen.n_gyros,
        gen.recordings_per_gyro,
        gen.n_samples,
        &gen.prior,
        gen.noise_std_dps,
        gen.sample_rate_hz,
        spec.seed,
    )?;
    spec.write_frozen()?;
    let manifest = write_dataset(&dataset, &spec.out_dir.join("dataset"))?;
    println!(
        "wrote {} gyros, {} recordings, {:.2} hours at {} Hz",
        dataset.gyros.len(),
        dataset.n_recordings(),
        hours(&dataset),
        dataset.sample_rate_hz
    );
    println!("manifest: {}", manifest.display());
    Ok(())
}

pub fn cmd_ingest(spec: &ExperimentSpec) -> Result<()> {
    let dataset = load_real(spec)?;
    println!(
        "brand {:?} at {} Hz: {} gyros, {} recordings, {:.2} hours",
        dataset.brand,
        dataset.sample_rate_hz,
        dataset.gyros.len(),
        dataset.n_recordings(),
        hours(&dataset)
    );
    for gyro in &dataset.gyros {
        let samples: usize = gyro.recordings.iter().map(|r| r.len()).sum();
        println!(
            "  {}: {} recordings, {} samples",
            gyro.gyro_id,
            gyro.recordings.len(),
            samples
        );
    }
    Ok(())
}

pub fn cmd_train(spec: &ExperimentSpec) -> Result<()> {
    let prep = prepare_data(spec)?;
    spec.write_frozen()?;
    println!(
        "train {} recordings, test {} recordings",
        prep.train.n_recordings(),
        prep.test.n_recordings()
    );
    for (i, &window_s) in spec.window_s.iter().enumerate() {
        let examples = make_windows(
            &prep.train,
            window_s,
            prep.mode,
            prep.stack_gyros.as_deref(),
        )?;
        let first = examples
            .first()
            .ok_or_else(|| Error::invalid("no training windows"))?;
        let net = spec.net.to_config(first.channels, first.window_len);
        let report = train(&examples, &net, &spec.train)?;
        let checkpoint = spec.out_dir.join(format!("checkpoint_w{i}.json"));
        save_checkpoint(&checkpoint, &net, &report.params, spec.seed)?;
        write_train_log(&report, &spec.out_dir.join(format!("train_log_w{i}.csv")))?;
        println!(
            "window {window_s} s: {} examples, final loss {:.6e}, {:.1} s -> {}",
            examples.len(),
            report.losses.last().copied().unwrap_or(f64::NAN),
            report.wall_time_s,
            checkpoint.display()
        );
    }
    Ok(())
}

pub fn cmd_eval(spec: &ExperimentSpec) -> Result<()> {
    let prep = prepare_data(spec)?;
    let test_recordings: Vec<&GyroRecording> = prep.test.recordings().collect();
    let curve = model_based_rmse_curve(&test_recordings)?;
    // Compute every report before touching the output directory, so a bad
    // checkpoint cannot leave partial results behind.
    let mut reports = Vec::with_capacity(spec.window_s.len());
    for (i, &window_s) in spec.window_s.iter().enumerate() {
        let checkpoint = spec.out_dir.join(format!("checkpoint_w{i}.json"));
        let (net, params, _) = load_checkpoint(&checkpoint)?;
        let nn_rmse = nn_rmse_at_window(
            &params,
            &net,
            &prep.test,
            window_s,
            prep.mode,
            prep.stack_gyros.as_deref(),
        )?;
        reports.push(improvement_report(window_s, nn_rmse, &curve)?);
    }
    spec.write_frozen()?;
    let eval_dir = spec.out_dir.join("eval");
    fs::create_dir_all(&eval_dir).map_err(|e| Error::io(&eval_dir, e))?;
    curve.write_csv(&eval_dir.join("model_curve.csv"))?;
    let mut points = String::from("window_s,nn_rmse_dps\n");
    for report in &reports {
        points.push_str(&format!("{},{}\n", report.window_s, report.nn_rmse_dps));
    }
    let points_path = eval_dir.join("nn_points.csv");
    fs::write(&points_path, points).map_err(|e| Error::io(&points_path, e))?;
    for (i, report) in reports.iter().enumerate() {
        let path = eval_dir.join(format!("report_w{i}.json"));
        let mut text = serde_json::to_string_pretty(report)
            .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let table = render_table(&reports);
    let table_path = eval_dir.join("table.txt");
    fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    print!("{table}");
    Ok(())
}

pub fn cmd_compare(spec: &ExperimentSpec) -> Result<()> {
    let eval_dir = spec.out_dir.join("eval");
    let mut reports: Vec<ComparisonReport> = Vec::new();
    loop {
        let path: PathBuf = eval_dir.join(format!("report_w{}.json", reports.len()));
        if !path.exists() {
            break;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let report = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::invalid(format!(
            "no evaluation reports under {}; run eval first",
            eval_dir.display()
        )));
    }
    print!("{}", render_table(&reports));
    Ok(())
}
