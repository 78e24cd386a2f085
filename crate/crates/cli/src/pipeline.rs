//! Stage DAG, seeds, staleness checks and atomic commits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use eocsa_core::seed;
use log::info;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{self, sha256_hex, StageManifest};
use crate::stages;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Sample,
    Cluster,
    Train,
    Select,
    Features,
    Aggregate,
    Survive,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Sample,
        Stage::Cluster,
        Stage::Train,
        Stage::Select,
        Stage::Features,
        Stage::Aggregate,
        Stage::Survive,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Sample => "sample",
            Stage::Cluster => "cluster",
            Stage::Train => "train",
            Stage::Select => "select",
            Stage::Features => "features",
            Stage::Aggregate => "aggregate",
            Stage::Survive => "survive",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    /// Stages whose outputs this stage reads. `Synth` stands for the input
    /// data, wherever it lives.
    pub fn reads(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Synth => &[],
            Sample => &[Synth],
            Cluster => &[Sample],
            Train => &[Synth, Sample, Cluster],
            Select => &[Synth, Sample, Cluster, Train],
            Features => &[Sample, Cluster, Train, Select],
            Aggregate => &[Synth, Features],
            Survive => &[Synth, Aggregate],
            Report => &[Select, Survive],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    UpToDate,
    /// `data_root` is set, so there is nothing to synthesize.
    External,
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    seed_override: Option<u64>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, seed_override: Option<u64>) -> Self {
        Self { cfg, seed_override }
    }

    pub fn out_root(&self) -> &Path {
        &self.cfg.paths.output_root
    }

    pub fn stage_dir(&self, s: Stage) -> PathBuf {
        self.out_root().join(s.name())
    }

    pub fn data_dir(&self) -> PathBuf {
        self.cfg.data_dir()
    }

    fn external_data(&self) -> bool {
        self.cfg.paths.data_root.is_some()
    }

    /// `--stage-seed` when given, otherwise the stage name hashed with the
    /// global seed.
    pub fn stage_seed(&self, s: Stage) -> u64 {
        self.seed_override
            .unwrap_or_else(|| seed::derive_named(self.cfg.seed, s.name()))
    }

    /// Hash of the configuration slice a stage depends on, with its seed.
    pub fn config_hash(&self, s: Stage, stage_seed: u64) -> String {
        #[derive(Serialize)]
        struct Keyed<'a, T: Serialize> {
            stage: &'a str,
            seed: u64,
            config: T,
        }
        let c = &self.cfg;
        let config = match s {
            Stage::Synth => serde_json::to_value(eocsa_core::synth::SynthSpec { seed: 0, ..c.synth.clone() }),
            Stage::Sample => serde_json::to_value(eocsa_core::sampler::SamplerConfig {
                seed: 0,
                ..c.sampler.clone()
            }),
            Stage::Cluster => serde_json::to_value(&c.cluster),
            Stage::Train => serde_json::to_value((self.dcas_unseeded(), c.selection.test_fraction)),
            Stage::Select => serde_json::to_value((self.dcas_unseeded(), &c.selection)),
            Stage::Features => serde_json::to_value(self.dcas_unseeded()),
            Stage::Aggregate => serde_json::to_value(()),
            Stage::Survive => serde_json::to_value(&c.survival),
            Stage::Report => serde_json::to_value(c.selection.threshold),
        }
        .expect("config serializes");
        let keyed = Keyed {
            stage: s.name(),
            seed: stage_seed,
            config,
        };
        sha256_hex(&serde_json::to_vec(&keyed).expect("config serializes"))
    }

    fn dcas_unseeded(&self) -> eocsa_core::dcas::DcasConfig {
        eocsa_core::dcas::DcasConfig {
            seed: 0,
            ..self.cfg.dcas.clone()
        }
    }

    /// Hashes of the clinical table, the image manifest and every image it
    /// lists.
    fn external_data_hash(&self) -> CliResult<String> {
        let dir = self.data_dir();
        let clinical = dir.join("clinical.csv");
        let images = dir.join("images.csv");
        for p in [&clinical, &images] {
            if !p.exists() {
                return Err(CliError::Stale(format!("data file {} is missing", p.display())));
            }
        }
        let mut parts = vec![manifest::hash_file(&clinical)?, manifest::hash_file(&images)?];
        let listed = eocsa_core::data::read_image_manifest(&images)?;
        for path in listed.values().flatten() {
            let p = dir.join(path);
            if !p.exists() {
                return Err(CliError::Stale(format!("image {} is missing", p.display())));
            }
            parts.push(manifest::hash_file(&p)?);
        }
        Ok(sha256_hex(parts.join("\n").as_bytes()))
    }

    /// Verifies one upstream stage and returns the hash that identifies it.
    fn upstream_hash(&self, downstream: Stage, up: Stage) -> CliResult<String> {
        if up == Stage::Synth && self.external_data() {
            return self.external_data_hash();
        }
        let dir = self.stage_dir(up);
        let m = manifest::verify(&dir)?.map_err(|reason| {
            CliError::Stale(format!(
                "`{downstream}` needs the outputs of `{up}`: {reason}; run `{up}` first"
            ))
        })?;
        if m.config_hash != self.config_hash(up, m.seed) {
            return Err(CliError::Stale(format!(
                "`{up}` outputs were produced with a different configuration; re-run `{up}`"
            )));
        }
        manifest::hash_file(&dir.join(manifest::MANIFEST))
    }

    pub fn upstream_inputs(&self, s: Stage) -> CliResult<BTreeMap<String, String>> {
        s.reads()
            .iter()
            .map(|&up| Ok((up.name().to_string(), self.upstream_hash(s, up)?)))
            .collect()
    }

    pub fn run(&self, s: Stage) -> CliResult<Outcome> {
        if s == Stage::Synth && self.external_data() {
            info!("synth: data_root is set, nothing to generate");
            return Ok(Outcome::External);
        }
        let inputs = self.upstream_inputs(s)?;
        let stage_seed = self.stage_seed(s);
        let config_hash = self.config_hash(s, stage_seed);
        let dir = self.stage_dir(s);
        if let Ok(existing) = manifest::verify(&dir)? {
            if existing.config_hash == config_hash && existing.inputs == inputs {
                info!("{s}: up to date");
                return Ok(Outcome::UpToDate);
            }
        }

        let tmp = self.out_root().join(format!("{}.tmp", s.name()));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        }
        std::fs::create_dir_all(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        info!("{s}: running (seed {stage_seed})");
        let deferred = stages::run_body(self, s, stage_seed, &tmp)?;
        let m = StageManifest {
            stage: s.name().to_string(),
            seed: stage_seed,
            config_hash,
            inputs,
            outputs: manifest::hash_tree(&tmp)?,
        };
        manifest::write_manifest(&tmp, &m)?;
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        std::fs::rename(&tmp, &dir).map_err(|e| CliError::io(&dir, e))?;
        info!("{s}: wrote {}", dir.display());
        match deferred {
            Some(msg) => Err(CliError::Numeric(msg)),
            None => Ok(Outcome::Ran),
        }
    }

    /// Runs every stage in order, stopping at the first failure.
    pub fn run_all(&self) -> CliResult<Vec<(Stage, Outcome)>> {
        Stage::ALL
            .into_iter()
            .map(|s| self.run(s).map(|o| (s, o)))
            .collect()
    }
}
