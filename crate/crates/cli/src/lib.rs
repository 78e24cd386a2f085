//! Stage runner for the slide-to-survival pipeline.
//!
//! Every stage reads the committed outputs of its upstream stages, writes
//! into `<output_root>/<stage>.tmp` and renames that directory into place
//! together with a `stage.json` recording its seed, configuration hash,
//! input hashes and output hashes. Upstream manifests that are missing,
//! modified or produced under a different configuration stop the run with a
//! stale-input error.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod plots;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{Outcome, Pipeline, Stage};

/// Runs one stage, or every stage in order when `stage` is `None`.
pub fn run(cfg: PipelineConfig, stage: Option<Stage>, seed_override: Option<u64>) -> CliResult<Vec<(Stage, Outcome)>> {
    let p = Pipeline::new(cfg, seed_override);
    match stage {
        Some(s) => Ok(vec![(s, p.run(s)?)]),
        None => p.run_all(),
    }
}
