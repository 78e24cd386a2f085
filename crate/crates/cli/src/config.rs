//! Pipeline configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! output_root = "out"     # relative to the config file
//! # data_root = "data"    # clinical.csv + images.csv; defaults to <output_root>/synth
//!
//! [synth]      # SynthSpec
//! [sampler]    # SamplerConfig
//! [cluster]    # p, thumb_side, pca_dim, max_iter
//! [dcas]       # DcasConfig
//! [selection]  # threshold, test_fraction
//! [survival]   # folds, outer_folds, horizons_years, lambdas, ...
//! ```
//!
//! Every table is optional and falls back to its defaults. Seeds inside the
//! sub-tables are ignored: each stage receives a seed derived from the
//! global one.

use std::path::{Path, PathBuf};

use eocsa_core::dcas::DcasConfig;
use eocsa_core::sampler::SamplerConfig;
use eocsa_core::synth::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub data_root: Option<PathBuf>,
    pub output_root: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_root: None,
            output_root: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Number of K-means clusters.
    pub p: usize,
    pub thumb_side: u32,
    pub pca_dim: usize,
    pub max_iter: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            p: 10,
            thumb_side: 16,
            pca_dim: 8,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub threshold: f64,
    /// Fraction of a cluster's patients held out for evaluation.
    pub test_fraction: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            threshold: 0.55,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalConfig {
    /// Inner folds choosing the LASSO penalty.
    pub folds: usize,
    /// Outer patient folds for the held-out C-index.
    pub outer_folds: usize,
    pub horizons_years: Vec<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SurvivalConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            outer_folds: 5,
            horizons_years: vec![1.0, 3.0, 5.0],
            lambdas: None,
            n_lambdas: 50,
            lambda_min_ratio: 1e-3,
            tol: 1e-7,
            max_sweeps: 10_000,
        }
    }
}

pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthSpec,
    pub sampler: SamplerConfig,
    pub cluster: ClusterConfig,
    pub dcas: DcasConfig,
    pub selection: SelectionConfig,
    pub survival: SurvivalConfig,
}

fn invalid(e: eocsa_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl PipelineConfig {
    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.output_root = base.join(&cfg.paths.output_root);
        if let Some(d) = &cfg.paths.data_root {
            cfg.paths.data_root = Some(base.join(d));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.synth.validate().map_err(invalid)?;
        self.sampler.validate().map_err(invalid)?;
        self.dcas.validate().map_err(invalid)?;
        if self.dcas.input_side != self.sampler.side as usize {
            return Err(CliError::Config(format!(
                "dcas.input_side {} differs from sampler.side {}",
                self.dcas.input_side, self.sampler.side
            )));
        }
        let c = &self.cluster;
        if c.p == 0 || c.pca_dim == 0 || c.max_iter == 0 {
            return Err(CliError::Config("cluster p, pca_dim and max_iter must be > 0".into()));
        }
        if c.thumb_side == 0 || c.thumb_side > self.sampler.side {
            return Err(CliError::Config(format!(
                "cluster.thumb_side must lie in [1, {}]",
                self.sampler.side
            )));
        }
        if c.pca_dim > (c.thumb_side * c.thumb_side) as usize {
            return Err(CliError::Config("cluster.pca_dim exceeds the thumbnail dimension".into()));
        }
        let s = &self.selection;
        if !(0.0..=1.0).contains(&s.threshold) || !(s.test_fraction > 0.0 && s.test_fraction < 1.0) {
            return Err(CliError::Config(
                "selection.threshold must lie in [0, 1] and test_fraction in (0, 1)".into(),
            ));
        }
        let v = &self.survival;
        if v.outer_folds < 2 || v.horizons_years.iter().any(|h| !(*h > 0.0)) {
            return Err(CliError::Config(
                "survival.outer_folds must be >= 2 and horizons positive".into(),
            ));
        }
        self.lasso(0).validate().map_err(invalid)?;
        Ok(())
    }

    pub fn lasso(&self, seed: u64) -> eocsa_core::survival::LassoCoxConfig {
        let v = &self.survival;
        eocsa_core::survival::LassoCoxConfig {
            lambdas: v.lambdas.clone(),
            n_lambdas: v.n_lambdas,
            lambda_min_ratio: v.lambda_min_ratio,
            folds: v.folds,
            seed,
            tol: v.tol,
            max_sweeps: v.max_sweeps,
        }
    }

    /// Directory holding `clinical.csv` and `images.csv`.
    pub fn data_dir(&self) -> PathBuf {
        self.paths
            .data_root
            .clone()
            .unwrap_or_else(|| self.paths.output_root.join("synth"))
    }
}
