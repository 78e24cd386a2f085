use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use eocsa_cli::manifest::hash_tree;
use eocsa_cli::{run, PipelineConfig};
use tempfile::TempDir;

use crate::Verdict;

/// 60 patients with one image each, 64×64 patches, four clusters, the desk
/// network profile and five outer folds.
fn desk_toml(signal: f64) -> String {
    format!(
        r#"seed = 1

[synth]
n_patients = 60
images_per_patient = 1
image_side = 192
signal_strength = {signal:?}

[sampler]
side = 64
ratio = 1.0

[cluster]
p = 4

[dcas]
input_side = 64
epochs = 30
batch_size = 32

[survival]
outer_folds = 5
"#
    )
}

/// Output tree of the first signal-2 run, kept for the determinism check.
static FIRST_RUN: Mutex<Option<TempDir>> = Mutex::new(None);

fn run_desk(signal: f64) -> Result<(TempDir, serde_json::Value, f64), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("eocsa.toml");
    std::fs::write(&path, desk_toml(signal)).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::load(&path).map_err(|e| e.to_string())?;
    let start = Instant::now();
    run(cfg, None, None).map_err(|e| format!("signal {signal}: {e}"))?;
    let secs = start.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(dir.path().join("out/survive/survival_report.json")).map_err(|e| e.to_string())?;
    let report = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((dir, report, secs))
}

fn cindex(report: &serde_json::Value, key: &str) -> Option<f64> {
    report[key].as_f64()
}

fn show(c: Option<f64>) -> String {
    c.map_or_else(|| "undefined".into(), |v| format!("{v:.3}"))
}

pub fn end_to_end() -> Verdict {
    let (dir, strong, t_strong) = run_desk(2.0)?;
    *FIRST_RUN.lock().unwrap() = Some(dir);
    let (_null_dir, null, t_null) = run_desk(0.0)?;

    let c_strong = cindex(&strong, "cindex_mean");
    let c_null = cindex(&null, "cindex_mean");
    let detail = format!(
        "signal 2: mean fold C-index {} (pooled {}) in {t_strong:.0}s; signal 0: {} (pooled {}) in {t_null:.0}s",
        show(c_strong),
        show(cindex(&strong, "cindex_pooled")),
        show(c_null),
        show(cindex(&null, "cindex_pooled")),
    );
    let ok = c_strong.is_some_and(|c| c >= 0.75)
        && c_null.is_some_and(|c| (0.4..=0.6).contains(&c))
        && t_strong < 1800.0
        && t_null < 1800.0;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tree(dir: &Path) -> Result<std::collections::BTreeMap<String, String>, String> {
    hash_tree(&dir.join("out")).map_err(|e| e.to_string())
}

pub fn determinism() -> Verdict {
    let first = match FIRST_RUN.lock().unwrap().take() {
        Some(d) => d,
        None => run_desk(2.0)?.0,
    };
    let (second, _, _) = run_desk(2.0)?;
    let (a, b) = (tree(first.path())?, tree(second.path())?);
    if a == b {
        return Ok(format!("{} files byte-identical", a.len()));
    }
    let differing: Vec<&String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .take(5)
        .collect();
    Err(format!("output trees differ, e.g. {differing:?}"))
}
