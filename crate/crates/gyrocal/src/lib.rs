//! Rapid gyroscope calibration toolkit.
//!
//! Stationary gyroscopes measure a bias plus noise; averaging long recordings
//! ("zero-order" calibration) estimates that bias slowly, while a small 1D
//! convolutional network trained on many power-cycle recordings can regress it
//! from a short window. This crate provides the building blocks end to end:
//!
//! * [`error_model`]: the measurement error model, stationary-recording
//!   simulation and virtual gyroscope synthesis,
//! * [`dataset`]: CSV/JSON ingestion, dataset generation, windowing and
//!   train/test splits,
//! * [`calib`]: zero-order bias estimation and running-average convergence
//!   curves, single- and multi-gyro,
//! * [`nn`]: the bias-regression network (conv, leaky ReLU, max-pool, two
//!   fully connected layers) with hand-rolled backprop and Adam,
//! * [`eval`]: RMSE metrics, model-based running-RMSE curves, crossing
//!   times, improvement reports and a Bayes posterior-mean oracle.
//!
//! All randomness flows through seeded ChaCha8 streams derived with the rule
//! documented in [`rng`], so every simulation, training run and report is
//! bit-reproducible from a single master seed.

pub mod calib;
pub mod dataset;
mod error;
pub mod error_model;
pub mod eval;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
