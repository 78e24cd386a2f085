//! Per-cluster evaluation on held-out patches, threshold selection and
//! patch feature extraction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::data::{write_atomic, PatchManifest, SurvivalRecord};
use crate::dcas::DcasModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::survival::concordance;

/// Patches pushed through the network per forward pass during inference.
const INFER_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster_id: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Held-out patch-level C-index; empty when unevaluable.
    pub test_cindex: Option<f64>,
    pub selected: bool,
}

impl ClusterReport {
    /// Report for a cluster that could not be trained or evaluated.
    pub fn unevaluable(cluster_id: usize, n_train: usize, n_test: usize) -> Self {
        Self {
            cluster_id,
            n_train,
            n_test,
            test_cindex: None,
            selected: false,
        }
    }
}

/// Scores held-out patches with `model`. Fewer than 2 comparable pairs
/// yields an unevaluable report.
pub fn evaluate_cluster(
    cluster_id: usize,
    model: &DcasModel,
    test_input: &Tensor,
    test_records: &[SurvivalRecord],
    n_train: usize,
    threshold: f64,
) -> Result<ClusterReport> {
    let (risks, _) = model.predict(test_input, INFER_CHUNK)?;
    report_from_risks(cluster_id, &risks, test_records, n_train, threshold)
}

pub fn report_from_risks(
    cluster_id: usize,
    risks: &[f64],
    records: &[SurvivalRecord],
    n_train: usize,
    threshold: f64,
) -> Result<ClusterReport> {
    let c = concordance(risks, records)?;
    if c.comparable < 2 {
        return Ok(ClusterReport::unevaluable(cluster_id, n_train, records.len()));
    }
    let ci = c.index();
    Ok(ClusterReport {
        cluster_id,
        n_train,
        n_test: records.len(),
        test_cindex: Some(ci),
        selected: ci >= threshold,
    })
}

/// Ids of evaluable clusters with C-index `>= threshold`, ascending.
pub fn select_clusters(reports: &[ClusterReport], threshold: f64) -> Result<Vec<usize>> {
    let mut ids: Vec<usize> = reports
        .iter()
        .filter(|r| r.test_cindex.is_some_and(|c| c >= threshold))
        .map(|r| r.cluster_id)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::Data(format!(
            "no cluster reached the C-index threshold {threshold}; review the threshold or the cluster models"
        )));
    }
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeature {
    pub patch_id: String,
    pub patient_id: String,
    pub cluster_id: usize,
    pub vector: Vec<f64>,
}

/// Eval-mode features for `patches` (aligned with the rows of `input`).
pub fn extract_features(
    model: &DcasModel,
    cluster_id: usize,
    input: &Tensor,
    patches: &[PatchManifest],
) -> Result<Vec<PatchFeature>> {
    let dims = input.dims4()?;
    if dims[0] != patches.len() {
        return Err(Error::Shape(format!(
            "{} patch tensors for {} manifest rows",
            dims[0],
            patches.len()
        )));
    }
    let (_, feats) = model.predict(input, INFER_CHUNK)?;
    Ok(patches
        .iter()
        .enumerate()
        .map(|(i, p)| PatchFeature {
            patch_id: p.patch_id.clone(),
            patient_id: p.patient_id.clone(),
            cluster_id,
            vector: feats.row(i).to_vec(),
        })
        .collect())
}

pub fn write_cluster_reports(path: &Path, reports: &[ClusterReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster_id", "n_train", "n_test", "test_cindex", "selected"])
        .map_err(|e| Error::csv(path, e))?;
    for r in reports {
        w.write_record([
            r.cluster_id.to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.test_cindex.map(|c| c.to_string()).unwrap_or_default(),
            r.selected.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_cluster_reports(path: &Path) -> Result<Vec<ClusterReport>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureIndexRow {
    patch_id: String,
    patient_id: String,
    cluster_id: usize,
    row: usize,
}

/// Binary matrix at `bin` plus a `patch_id,patient_id,cluster_id,row` index.
pub fn write_patch_features(bin: &Path, index: &Path, feats: &[PatchFeature]) -> Result<()> {
    let dim = feats.first().map_or(0, |f| f.vector.len());
    let mut data = Vec::with_capacity(feats.len() * dim);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["patch_id", "patient_id", "cluster_id", "row"])
        .map_err(|e| Error::csv(index, e))?;
    for (row, f) in feats.iter().enumerate() {
        if f.vector.len() != dim {
            return Err(Error::Shape(format!(
                "feature {} has length {}, expected {dim}",
                f.patch_id,
                f.vector.len()
            )));
        }
        data.extend_from_slice(&f.vector);
        w.serialize(FeatureIndexRow {
            patch_id: f.patch_id.clone(),
            patient_id: f.patient_id.clone(),
            cluster_id: f.cluster_id,
            row,
        })
        .map_err(|e| Error::csv(index, e))?;
    }
    Matrix::from_vec(feats.len(), dim, data)?.save(bin)?;
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(index, &bytes)
}

pub fn read_patch_features(bin: &Path, index: &Path) -> Result<Vec<PatchFeature>> {
    let m = Matrix::load(bin)?;
    let mut r = csv::Reader::from_path(index).map_err(|e| Error::csv(index, e))?;
    let mut out = Vec::new();
    for row in r.deserialize::<FeatureIndexRow>() {
        let row = row.map_err(|e| Error::csv(index, e))?;
        if row.row >= m.rows() {
            return Err(Error::Data(format!(
                "feature index row {} beyond matrix with {} rows",
                row.row,
                m.rows()
            )));
        }
        out.push(PatchFeature {
            vector: m.row(row.row).to_vec(),
            patch_id: row.patch_id,
            patient_id: row.patient_id,
            cluster_id: row.cluster_id,
        });
    }
    Ok(out)
}
