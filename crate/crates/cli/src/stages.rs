//! Stage bodies. Each writes into a fresh temporary directory that the
//! pipeline commits afterwards.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eocsa_core::aggregate::{aggregate, read_patient_features, write_patient_features};
use eocsa_core::autodiff::Tensor;
use eocsa_core::data::{
    fold_assignment, load_cohort, load_rgb, read_patch_manifest, save_png, write_atomic, write_patch_manifest,
};
use eocsa_core::dcas::{patches_to_tensor, patient_holdout, train_cluster_model, DcasConfig, DcasModel};
use eocsa_core::embed::{fit_kmeans, fit_pca, thumbnail_embed};
use eocsa_core::sampler::{crop, sample_patches, ImageRef, SamplerConfig};
use eocsa_core::select::{
    evaluate_cluster, extract_features, read_cluster_reports, read_patch_features, select_clusters,
    write_cluster_reports, write_patch_features, ClusterReport, PatchFeature,
};
use eocsa_core::survival::{
    concordance, fit_lasso_cox, kaplan_meier, log_rank, median_risk_split, time_dependent_roc, KmCurve,
};
use eocsa_core::synth::{generate_cohort, write_synthetic, SynthSpec};
use eocsa_core::{seed, Cohort, Error, Matrix, PatchManifest, SurvivalRecord};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DAYS_PER_YEAR;
use crate::error::{CliError, CliResult};
use crate::pipeline::{Pipeline, Stage};
use crate::plots;

/// A failure to report after the stage outputs are committed.
pub type Deferred = Option<String>;

pub(crate) fn run_body(p: &Pipeline, s: Stage, stage_seed: u64, out: &Path) -> CliResult<Deferred> {
    match s {
        Stage::Synth => synth(p, stage_seed, out),
        Stage::Sample => sample(p, stage_seed, out),
        Stage::Cluster => cluster(p, stage_seed, out),
        Stage::Train => train(p, stage_seed, out),
        Stage::Select => select(p, out),
        Stage::Features => features(p, out),
        Stage::Aggregate => aggregate_stage(p, out),
        Stage::Survive => survive(p, stage_seed, out),
        Stage::Report => report(p, out),
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes()).map_err(CliError::from)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(Error::Format {
            path: path.into(),
            message: e.to_string(),
        })
    })
}

fn csv_err(path: &Path, source: csv::Error) -> CliError {
    CliError::Core(Error::Csv {
        path: path.into(),
        source,
    })
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e| csv_err(path, e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    write_atomic(path, &bytes).map_err(CliError::from)
}

fn cohort(p: &Pipeline) -> CliResult<Cohort> {
    let d = p.data_dir();
    Ok(load_cohort(&d.join("clinical.csv"), &d.join("images.csv"))?)
}

fn patch_png(p: &Pipeline, patch_id: &str) -> PathBuf {
    p.stage_dir(Stage::Sample).join("patches").join(format!("{patch_id}.png"))
}

fn clustered_patches(p: &Pipeline) -> CliResult<Vec<PatchManifest>> {
    Ok(read_patch_manifest(&p.stage_dir(Stage::Cluster).join("patches.csv"))?)
}

fn load_tensor(p: &Pipeline, patches: &[&PatchManifest]) -> CliResult<Tensor> {
    let imgs = patches
        .par_iter()
        .map(|m| load_rgb(&patch_png(p, &m.patch_id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(patches_to_tensor(&imgs, p.cfg.dcas.input_side)?)
}

fn records_for(cohort: &Cohort, patches: &[&PatchManifest]) -> CliResult<Vec<SurvivalRecord>> {
    patches
        .iter()
        .map(|m| {
            cohort
                .record(&m.patient_id)
                .cloned()
                .ok_or_else(|| CliError::Core(Error::UnknownPatient(m.patient_id.clone())))
        })
        .collect()
}

fn by_cluster(patches: &[PatchManifest], p: usize) -> Vec<Vec<&PatchManifest>> {
    let mut out = vec![Vec::new(); p];
    for m in patches {
        if let Some(k) = m.cluster {
            out[k].push(m);
        }
    }
    out
}

fn model_path(p: &Pipeline, k: usize) -> PathBuf {
    p.stage_dir(Stage::Train).join(format!("dcas_cluster_{k}.bin"))
}

fn synth(p: &Pipeline, stage_seed: u64, out: &Path) -> CliResult<Deferred> {
    let spec = SynthSpec {
        seed: stage_seed,
        ..p.cfg.synth.clone()
    };
    let s = generate_cohort(&spec)?;
    write_synthetic(out, &s)?;
    let rows = s
        .cohort
        .records
        .iter()
        .zip(&s.latent)
        .map(|(r, l)| vec![r.patient_id.clone(), format!("{l:e}")]);
    write_csv(&out.join("latent.csv"), &["patient_id", "latent_risk"], rows)?;
    info!("synth: {} patients, {} events", s.cohort.len(), s.cohort.n_events());
    Ok(None)
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleSummary {
    images: usize,
    patches: usize,
    budget: usize,
    rejected_draws: usize,
    shortfall: usize,
}

fn sample(p: &Pipeline, stage_seed: u64, out: &Path) -> CliResult<Deferred> {
    let cohort = cohort(p)?;
    let data = p.data_dir();
    let cfg = SamplerConfig {
        seed: stage_seed,
        ..p.cfg.sampler.clone()
    };
    let images: Vec<(String, String, String)> = cohort
        .image_manifest
        .iter()
        .flat_map(|(pid, paths)| {
            paths
                .iter()
                .enumerate()
                .map(move |(k, path)| (pid.clone(), path.clone(), format!("{pid}_{k}")))
        })
        .collect();
    let patch_dir = out.join("patches");
    std::fs::create_dir_all(&patch_dir).map_err(|e| CliError::io(&patch_dir, e))?;
    let outcomes = images
        .par_iter()
        .enumerate()
        .map(|(i, (pid, path, prefix))| {
            let img = load_rgb(&data.join(path))?;
            let src = ImageRef {
                patient_id: pid,
                image_path: path,
                patch_prefix: prefix,
            };
            let o = sample_patches(&img, &cfg, seed::derive(cfg.seed, i as u64), src)?;
            for m in &o.patches {
                save_png(&patch_dir.join(format!("{}.png", m.patch_id)), &crop(&img, m))?;
            }
            Ok(o)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let patches: Vec<PatchManifest> = outcomes.iter().flat_map(|o| o.patches.clone()).collect();
    if patches.is_empty() {
        return Err(Error::Data("no tissue patch could be sampled".into()).into());
    }
    write_patch_manifest(&out.join("patches.csv"), &patches)?;
    let summary = SampleSummary {
        images: images.len(),
        patches: patches.len(),
        budget: outcomes.iter().map(|o| o.budget).sum(),
        rejected_draws: outcomes.iter().map(|o| o.rejected_draws).sum(),
        shortfall: outcomes.iter().map(|o| o.shortfall).sum(),
    };
    info!("sample: {} patches from {} images", summary.patches, summary.images);
    write_json(&out.join("sample.json"), &summary)?;
    Ok(None)
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterSummary {
    p: usize,
    cost: f64,
    cost_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    explained_variance: Vec<f64>,
    cluster_sizes: Vec<usize>,
}

fn cluster(p: &Pipeline, stage_seed: u64, out: &Path) -> CliResult<Deferred> {
    let c = &p.cfg.cluster;
    let mut patches = read_patch_manifest(&p.stage_dir(Stage::Sample).join("patches.csv"))?;
    let rows = patches
        .par_iter()
        .map(|m| thumbnail_embed(&load_rgb(&patch_png(p, &m.patch_id))?, c.thumb_side))
        .collect::<Result<Vec<_>, _>>()?;
    let x = Matrix::from_rows(&rows)?;
    let pca = fit_pca(&x, c.pca_dim)?;
    let z = pca.project_all(&x);
    let km = fit_kmeans(&z, c.p, stage_seed, c.max_iter)?;
    let mut sizes = vec![0; c.p];
    for (m, &k) in patches.iter_mut().zip(&km.assignments) {
        m.cluster = Some(k);
        sizes[k] += 1;
    }
    write_patch_manifest(&out.join("patches.csv"), &patches)?;
    z.save(&out.join("embeddings.bin"))?;
    info!("cluster: sizes {sizes:?}");
    write_json(
        &out.join("kmeans.json"),
        &ClusterSummary {
            p: c.p,
            cost: km.cost,
            cost_trace: km.cost_trace,
            iterations: km.iterations,
            converged: km.converged,
            explained_variance: pca.explained_variance,
            cluster_sizes: sizes,
        },
    )?;
    Ok(None)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterTraining {
    pub cluster: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub trained: bool,
    pub final_loss: Option<f64>,
    pub note: Option<String>,
}

fn train(p: &Pipeline, stage_seed: u64, out: &Path) -> CliResult<Deferred> {
    let cohort = cohort(p)?;
    let patches = clustered_patches(p)?;
    let groups = by_cluster(&patches, p.cfg.cluster.p);
    let results = groups
        .par_iter()
        .enumerate()
        .map(|(k, members)| -> CliResult<(ClusterTraining, Vec<Vec<String>>)> {
            let ids: Vec<String> = members.iter().map(|m| m.patient_id.clone()).collect();
            let split = |tr: &[usize], te: &[usize]| {
                let mut rows: Vec<(usize, &str)> =
                    tr.iter().map(|&i| (i, "train")).chain(te.iter().map(|&i| (i, "test"))).collect();
                rows.sort_unstable();
                rows.into_iter()
                    .map(|(i, role)| vec![members[i].patch_id.clone(), k.to_string(), role.to_string()])
                    .collect::<Vec<_>>()
            };
            let skipped = |n_train, n_test, note: String| ClusterTraining {
                cluster: k,
                n_train,
                n_test,
                trained: false,
                final_loss: None,
                note: Some(note),
            };
            let (tr, te) = match patient_holdout(&ids, p.cfg.selection.test_fraction, seed::derive(stage_seed, k as u64)) {
                Ok(s) => s,
                Err(e) => {
                    let all: Vec<usize> = (0..members.len()).collect();
                    return Ok((skipped(members.len(), 0, e.to_string()), split(&all, &[])));
                }
            };
            let rows = split(&tr, &te);
            let train_patches: Vec<&PatchManifest> = tr.iter().map(|&i| members[i]).collect();
            let records = records_for(&cohort, &train_patches)?;
            let input = load_tensor(p, &train_patches)?;
            let cfg = DcasConfig {
                seed: seed::derive(stage_seed, 1 << 32 | k as u64),
                ..p.cfg.dcas.clone()
            };
            match train_cluster_model(&input, &records, &cfg) {
                Ok(o) => {
                    o.model.save(&out.join(format!("dcas_cluster_{k}.bin")))?;
                    let trace = o.trace.iter().map(|s| vec![s.epoch.to_string(), format!("{:e}", s.loss), format!("{:e}", s.lr)]);
                    write_csv(&out.join(format!("trace_cluster_{k}.csv")), &["epoch", "loss", "lr"], trace)?;
                    let last = o.trace.last().map(|s| s.loss);
                    info!("train: cluster {k} on {} patches, final loss {last:?}", tr.len());
                    Ok((
                        ClusterTraining {
                            cluster: k,
                            n_train: tr.len(),
                            n_test: te.len(),
                            trained: true,
                            final_loss: last,
                            note: None,
                        },
                        rows,
                    ))
                }
                Err(Error::Untrainable(why)) => {
                    warn!("train: cluster {k} skipped: {why}");
                    Ok((skipped(tr.len(), te.len(), why), rows))
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (summary, rows): (Vec<ClusterTraining>, Vec<Vec<Vec<String>>>) = results.into_iter().unzip();
    write_csv(&out.join("split.csv"), &["patch_id", "cluster_id", "role"], rows.into_iter().flatten())?;
    write_json(&out.join("train.json"), &summary)?;
    Ok(None)
}

fn read_split(p: &Pipeline) -> CliResult<BTreeMap<String, String>> {
    let path = p.stage_dir(Stage::Train).join("split.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(&path, e))?;
        out.insert(rec[0].to_string(), rec[2].to_string());
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Selection {
    pub threshold: f64,
    pub selected: Vec<usize>,
}

fn select(p: &Pipeline, out: &Path) -> CliResult<Deferred> {
    let cohort = cohort(p)?;
    let patches = clustered_patches(p)?;
    let groups = by_cluster(&patches, p.cfg.cluster.p);
    let roles = read_split(p)?;
    let summary: Vec<ClusterTraining> = read_json(&p.stage_dir(Stage::Train).join("train.json"))?;
    let thr = p.cfg.selection.threshold;
    let reports = summary
        .par_iter()
        .map(|t| -> CliResult<ClusterReport> {
            let test: Vec<&PatchManifest> = groups[t.cluster]
                .iter()
                .copied()
                .filter(|m| roles.get(&m.patch_id).is_some_and(|r| r == "test"))
                .collect();
            if !t.trained || test.is_empty() {
                return Ok(ClusterReport::unevaluable(t.cluster, t.n_train, t.n_test));
            }
            let model = DcasModel::load(&p.cfg.dcas, &model_path(p, t.cluster))?;
            let records = records_for(&cohort, &test)?;
            let input = load_tensor(p, &test)?;
            Ok(evaluate_cluster(t.cluster, &model, &input, &records, t.n_train, thr)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    for r in &reports {
        info!("select: cluster {} test C-index {:?}", r.cluster_id, r.test_cindex);
    }
    write_cluster_reports(&out.join("cluster_reports.csv"), &reports)?;
    let selected = select_clusters(&reports, thr)?;
    write_json(&out.join("selected.json"), &Selection { threshold: thr, selected })?;
    Ok(None)
}

fn features(p: &Pipeline, out: &Path) -> CliResult<Deferred> {
    let sel: Selection = read_json(&p.stage_dir(Stage::Select).join("selected.json"))?;
    let patches = clustered_patches(p)?;
    let groups = by_cluster(&patches, p.cfg.cluster.p);
    let per_cluster = sel
        .selected
        .par_iter()
        .map(|&k| -> CliResult<Vec<PatchFeature>> {
            let members = groups
                .get(k)
                .ok_or_else(|| CliError::Core(Error::Data(format!("selected cluster {k} does not exist"))))?;
            let model = DcasModel::load(&p.cfg.dcas, &model_path(p, k))?;
            let input = load_tensor(p, members)?;
            let owned: Vec<PatchManifest> = members.iter().map(|m| (*m).clone()).collect();
            Ok(extract_features(&model, k, &input, &owned)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let feats: Vec<PatchFeature> = per_cluster.into_iter().flatten().collect();
    write_patch_features(&out.join("patch_features.bin"), &out.join("patch_features.csv"), &feats)?;
    info!("features: {} patch vectors", feats.len());
    Ok(None)
}

fn aggregate_stage(p: &Pipeline, out: &Path) -> CliResult<Deferred> {
    let cohort = cohort(p)?;
    let dir = p.stage_dir(Stage::Features);
    let feats = read_patch_features(&dir.join("patch_features.bin"), &dir.join("patch_features.csv"))?;
    let ids: Vec<String> = cohort.records.iter().map(|r| r.patient_id.clone()).collect();
    let (rows, uncovered) = aggregate(&feats, &ids)?;
    if !uncovered.is_empty() {
        warn!("aggregate: {} patient(s) have no patch in a selected cluster", uncovered.len());
    }
    write_patient_features(&out.join("patient_features.csv"), &rows)?;
    write_csv(&out.join("uncovered.csv"), &["patient_id"], uncovered.into_iter().map(|u| vec![u]))?;
    Ok(None)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub lambda: f64,
    pub n_nonzero: usize,
    pub cindex: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonAuc {
    pub years: f64,
    pub days: f64,
    pub auc: Option<f64>,
    pub n_cases: usize,
    pub n_controls: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub n_patients: usize,
    pub n_events: usize,
    pub n_uncovered: usize,
    pub folds: Vec<FoldResult>,
    pub cindex_mean: Option<f64>,
    pub cindex_sd: Option<f64>,
    /// C-index of the out-of-fold risks pooled over all patients.
    pub cindex_pooled: Option<f64>,
    pub lambda: f64,
    pub lambda_max: f64,
    /// `(feature index, coefficient)` of the full-data fit.
    pub nonzero_coefficients: Vec<(usize, f64)>,
    pub n_high: usize,
    pub n_low: usize,
    pub logrank_chi_square: Option<f64>,
    pub logrank_p: Option<f64>,
    pub auc: Vec<HorizonAuc>,
    pub converged: bool,
}

pub fn horizon_label(years: f64) -> String {
    format!("{years}y")
}

fn cindex_or_none(risks: &[f64], records: &[SurvivalRecord]) -> CliResult<Option<f64>> {
    let c = concordance(risks, records)?;
    Ok((c.comparable > 0).then(|| c.index()))
}

fn write_km(path: &Path, km: Option<&KmCurve>) -> CliResult<()> {
    let rows = km
        .map(|k| {
            k.times
                .iter()
                .zip(&k.survival)
                .map(|(t, s)| vec![format!("{t:e}"), format!("{s:e}")])
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    write_csv(path, &["time", "survival"], rows)
}

fn survive(p: &Pipeline, stage_seed: u64, out: &Path) -> CliResult<Deferred> {
    let cohort = cohort(p)?;
    let agg = p.stage_dir(Stage::Aggregate);
    let pf = read_patient_features(&agg.join("patient_features.csv"))?;
    let n_uncovered = pf.len().abs_diff(cohort.len());
    let records: Vec<SurvivalRecord> = pf
        .iter()
        .map(|f| {
            cohort
                .record(&f.patient_id)
                .cloned()
                .ok_or_else(|| CliError::Core(Error::UnknownPatient(f.patient_id.clone())))
        })
        .collect::<CliResult<_>>()?;
    let rows: Vec<Vec<f64>> = pf.iter().map(|f| f.vector.clone()).collect();
    let x = Matrix::from_rows(&rows)?;
    let n = records.len();
    let sv = &p.cfg.survival;
    let k = sv.outer_folds.min(n);
    let assignment = fold_assignment(n, k, seed::derive(stage_seed, 0))?;

    let fold_fits = (0..k)
        .into_par_iter()
        .map(|f| -> CliResult<(Vec<usize>, Vec<f64>, FoldResult)> {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let tr_recs: Vec<SurvivalRecord> = train.iter().map(|&i| records[i].clone()).collect();
            let te_recs: Vec<SurvivalRecord> = test.iter().map(|&i| records[i].clone()).collect();
            let fit = fit_lasso_cox(&x.select_rows(&train), &tr_recs, &p.cfg.lasso(seed::derive(stage_seed, 1 + f as u64)))?;
            let risks = fit.predict(&x.select_rows(&test));
            let res = FoldResult {
                fold: f,
                n_test: test.len(),
                lambda: fit.lambda,
                n_nonzero: fit.nonzero().len(),
                cindex: cindex_or_none(&risks, &te_recs)?,
                converged: fit.converged,
            };
            Ok((test, risks, res))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut oof = vec![0.0; n];
    let mut folds = Vec::with_capacity(k);
    for (test, risks, res) in fold_fits {
        for (i, r) in test.into_iter().zip(risks) {
            oof[i] = r;
        }
        folds.push(res);
    }
    let cis: Vec<f64> = folds.iter().filter_map(|f| f.cindex).collect();
    let (mean, sd) = if cis.is_empty() {
        (None, None)
    } else {
        let m = cis.iter().sum::<f64>() / cis.len() as f64;
        let var = if cis.len() > 1 {
            cis.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (cis.len() - 1) as f64
        } else {
            0.0
        };
        (Some(m), Some(var.sqrt()))
    };

    let full = fit_lasso_cox(&x, &records, &p.cfg.lasso(seed::derive(stage_seed, 1 << 32)))?;
    let pooled = cindex_or_none(&oof, &records)?;

    let (high, low) = median_risk_split(&oof);
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let (rh, rl) = (pick(&high), pick(&low));
    let km_high = if rh.is_empty() { None } else { Some(kaplan_meier(&rh)?) };
    let km_low = if rl.is_empty() { None } else { Some(kaplan_meier(&rl)?) };
    write_km(&out.join("km_high.csv"), km_high.as_ref())?;
    write_km(&out.join("km_low.csv"), km_low.as_ref())?;
    let lr = if rh.is_empty() || rl.is_empty() {
        None
    } else {
        Some(log_rank(&rh, &rl)?)
    };

    let mut auc = Vec::new();
    for &years in &sv.horizons_years {
        let days = years * DAYS_PER_YEAR;
        let path = out.join(format!("roc_{}.csv", horizon_label(years)));
        match time_dependent_roc(&oof, &records, days) {
            Ok(roc) => {
                let rows = (0..roc.fpr.len()).map(|j| {
                    vec![format!("{:e}", roc.thresholds[j]), format!("{:e}", roc.fpr[j]), format!("{:e}", roc.tpr[j])]
                });
                write_csv(&path, &["threshold", "fpr", "tpr"], rows)?;
                auc.push(HorizonAuc {
                    years,
                    days,
                    auc: Some(roc.auc),
                    n_cases: roc.n_cases,
                    n_controls: roc.n_controls,
                });
            }
            Err(Error::Data(why)) => {
                warn!("survive: no ROC at {years} years: {why}");
                auc.push(HorizonAuc {
                    years,
                    days,
                    auc: None,
                    n_cases: 0,
                    n_controls: 0,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }

    let group: Vec<&str> = {
        let mut g = vec!["low"; n];
        for &i in &high {
            g[i] = "high";
        }
        g
    };
    let risk_rows = (0..n).map(|i| {
        vec![
            pf[i].patient_id.clone(),
            assignment[i].to_string(),
            format!("{:e}", oof[i]),
            group[i].to_string(),
        ]
    });
    write_csv(&out.join("risks.csv"), &["patient_id", "fold", "risk", "group"], risk_rows)?;

    let converged = full.converged && folds.iter().all(|f| f.converged);
    let report = SurvivalReport {
        n_patients: n,
        n_events: records.iter().filter(|r| r.event).count(),
        n_uncovered,
        folds,
        cindex_mean: mean,
        cindex_sd: sd,
        cindex_pooled: pooled,
        lambda: full.lambda,
        lambda_max: full.lambda_max,
        nonzero_coefficients: full.nonzero().into_iter().map(|j| (j, full.coefficients[j])).collect(),
        n_high: high.len(),
        n_low: low.len(),
        logrank_chi_square: lr.map(|l| l.chi_square),
        logrank_p: lr.map(|l| l.p_value),
        auc,
        converged,
    };
    info!(
        "survive: held-out C-index {:?} (pooled {:?}), log-rank p {:?}",
        report.cindex_mean, report.cindex_pooled, report.logrank_p
    );
    write_json(&out.join("survival_report.json"), &report)?;
    Ok((!converged).then(|| "LASSO-Cox did not converge within max_sweeps; see survival_report.json".to_string()))
}

fn report(p: &Pipeline, out: &Path) -> CliResult<Deferred> {
    let reports = read_cluster_reports(&p.stage_dir(Stage::Select).join("cluster_reports.csv"))?;
    plots::emit_plots(&reports, p.cfg.selection.threshold, &p.stage_dir(Stage::Survive), out)?;
    Ok(None)
}
