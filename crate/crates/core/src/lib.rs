//! Whole-slide-image survival prognosis.
//!
//! The pipeline samples tissue patches from slide rasters, clusters them on
//! thumbnail embeddings, trains one attention CNN per cluster against the Cox
//! partial likelihood, keeps the clusters whose held-out concordance clears a
//! threshold, averages their patch features into weighted patient vectors and
//! fits a LASSO-penalized Cox model on those.
//!
//! Modules follow the stages:
//!
//! - [`data`]: survival records, cohorts, patch manifests, CSV IO, folds
//! - [`sampler`]: patch budget and background-rejecting random sampling
//! - [`embed`]: grayscale thumbnails, PCA, K-means
//! - [`autodiff`]: tensors and reverse-mode differentiation
//! - [`dcas`]: the attention network, Cox loss and SGD training
//! - [`select`]: per-cluster evaluation, selection and feature extraction
//! - [`aggregate`]: weighted patient-level features
//! - [`survival`]: LASSO-Cox, C-index, Kaplan-Meier, log-rank, time-dependent ROC
//! - [`synth`]: synthetic cohorts and independent reference oracles

pub mod aggregate;
pub mod autodiff;
pub mod data;
pub mod dcas;
pub mod embed;
pub mod error;
pub mod matrix;
pub mod sampler;
pub mod seed;
pub mod select;
pub mod survival;
pub mod synth;

pub use data::{Cohort, PatchManifest, SurvivalRecord};
pub use error::{Error, Result};
pub use matrix::Matrix;
