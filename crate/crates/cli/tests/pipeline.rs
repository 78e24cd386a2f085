use std::path::Path;
use std::process::Command;

use eocsa_cli::manifest::hash_tree;
use eocsa_cli::{run, CliError, Outcome, PipelineConfig, Stage};

const TINY: &str = r#"
seed = 3

[synth]
n_patients = 14
image_side = 96
signal_strength = 2.0
censor_rate = 0.2

[sampler]
side = 48
ratio = 1.0

[cluster]
p = 2
thumb_side = 8
pca_dim = 4

[dcas]
input_side = 48
channels = 4
cbam_reduce = 2
nam_reduce = 4
feature_dim = 3
epochs = 2
batch_size = 16
lr0 = 0.01

[selection]
threshold = 0.0
test_fraction = 0.3

[survival]
folds = 3
outer_folds = 2
n_lambdas = 5
lambda_min_ratio = 0.1
horizons_years = [1.0, 3.0]
"#;

fn tiny(dir: &Path) -> PipelineConfig {
    let path = dir.join("eocsa.toml");
    std::fs::write(&path, TINY).unwrap();
    PipelineConfig::load(&path).unwrap()
}

#[test]
fn rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run(cfg.clone(), Some(Stage::Synth), None).unwrap();
    assert_eq!(run(cfg.clone(), Some(Stage::Sample), None).unwrap()[0].1, Outcome::Ran);
    let before = hash_tree(&dir.path().join("out/sample")).unwrap();
    assert_eq!(run(cfg, Some(Stage::Sample), None).unwrap()[0].1, Outcome::UpToDate);
    assert_eq!(hash_tree(&dir.path().join("out/sample")).unwrap(), before);
}

#[test]
fn missing_or_modified_upstream_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run(cfg.clone(), Some(Stage::Synth), None).unwrap();
    run(cfg.clone(), Some(Stage::Sample), None).unwrap();
    let err = run(cfg.clone(), Some(Stage::Train), None).unwrap_err();
    assert!(matches!(err, CliError::Stale(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("cluster"));

    let csv = dir.path().join("out/sample/patches.csv");
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push('\n');
    std::fs::write(&csv, text).unwrap();
    assert!(matches!(run(cfg, Some(Stage::Cluster), None), Err(CliError::Stale(_))));
}

#[test]
fn changed_upstream_config_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    run(cfg.clone(), Some(Stage::Synth), None).unwrap();
    run(cfg.clone(), Some(Stage::Sample), None).unwrap();
    cfg.sampler.bg_area_threshold = 0.4;
    let err = run(cfg, Some(Stage::Cluster), None).unwrap_err();
    assert!(matches!(err, CliError::Stale(_)), "{err}");
}

#[test]
fn stage_seed_override_changes_outputs_and_is_accepted_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run(cfg.clone(), Some(Stage::Synth), None).unwrap();
    run(cfg.clone(), Some(Stage::Sample), None).unwrap();
    let a = hash_tree(&dir.path().join("out/sample")).unwrap();
    assert_eq!(run(cfg.clone(), Some(Stage::Sample), Some(99)).unwrap()[0].1, Outcome::Ran);
    assert_ne!(hash_tree(&dir.path().join("out/sample")).unwrap(), a);
    assert_eq!(run(cfg, Some(Stage::Cluster), None).unwrap()[0].1, Outcome::Ran);
}

#[test]
fn full_run_emits_report_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let outcomes = run(cfg.clone(), None, None).unwrap();
    assert_eq!(outcomes.len(), Stage::ALL.len());
    let out = dir.path().join("out");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("survive/survival_report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 2);

    let bars = std::fs::read_to_string(out.join("report/cluster_cindex.svg")).unwrap();
    assert_eq!(bars.matches(r#"class="bar""#).count(), 2);
    assert_eq!(bars.matches(r#"class="threshold""#).count(), 1);

    let km_rows = |g: &str| {
        std::fs::read_to_string(out.join(format!("survive/km_{g}.csv")))
            .unwrap()
            .lines()
            .count()
            - 1
    };
    let km = std::fs::read_to_string(out.join("report/km.svg")).unwrap();
    for line in km.lines().filter(|l| l.contains(r#"class="km""#)) {
        let group = if line.contains(r#"data-group="high""#) { "high" } else { "low" };
        assert_eq!(line.matches(" H ").count(), km_rows(group));
    }

    for h in ["1y", "3y"] {
        let roc = out.join(format!("report/roc_{h}.svg"));
        if !roc.exists() {
            continue;
        }
        let svg = std::fs::read_to_string(roc).unwrap();
        let line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let xs: Vec<f64> = pts.split(' ').map(|p| p.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    }

    // every stage is now up to date
    assert!(run(cfg, None, None).unwrap().iter().all(|(_, o)| *o == Outcome::UpToDate));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_eocsa");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[cluster]\nk = 2\n").unwrap();
    let st = Command::new(bin).args(["--config", bad.to_str().unwrap(), "sample"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    tiny(dir.path());
    let good = dir.path().join("eocsa.toml");
    let st = Command::new(bin).args(["--config", good.to_str().unwrap(), "train"]).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    let st = Command::new(bin).args(["--config", good.to_str().unwrap(), "synth"]).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
}
