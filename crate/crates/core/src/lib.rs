//! Adaptive batch-mode active learning for anomaly detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] loads, standardizes, splits and synthesizes labeled data.
//! * [`mixture`] fits Gaussian mixtures by EM and selects the component count by BIC.
//! * [`cluster`] provides k-means++ seeding, Lloyd k-means and k-medoids.
//! * [`classifier`] trains an RBF-kernel SVM with SMO and calibrates it with Platt scaling.
//! * [`strategies`] holds the batch samplers and the balancing schedule that mixes
//!   representative and informative picks.
//! * [`engine`] drives the query/label/retrain loop and the repeated-run experiments.
//! * [`metrics`] computes average precision, discovery counts and confidence bands.

pub mod classifier;
pub mod cluster;
pub mod dataset;
pub mod engine;
mod error;
pub mod metrics;
pub mod mixture;
pub mod rng;
pub mod strategies;

pub use error::{Error, Result};
