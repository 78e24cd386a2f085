//! Weighted patient-level features from patch features.
//!
//! A patient covering `n_i` of the selected clusters gets weight
//! `w_i = n_i / (n_h − n_l)` (`n_h`, `n_l` the largest and smallest coverage
//! over patients, all weights 1 when they coincide). Its feature is the mean
//! over covered clusters of the per-cluster mean patch vector, times `w_i`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::select::PatchFeature;

#[derive(Debug, Clone, PartialEq)]
pub struct PatientFeature {
    pub patient_id: String,
    pub n_clusters_covered: usize,
    pub weight: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coverage {
    pub covered: BTreeMap<String, BTreeSet<usize>>,
    /// Patients from the cohort with no patch in any selected cluster.
    pub uncovered: Vec<String>,
}

pub fn cluster_coverage(features: &[PatchFeature], cohort_patients: &[String]) -> Coverage {
    let mut covered: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for f in features {
        covered.entry(f.patient_id.clone()).or_default().insert(f.cluster_id);
    }
    let uncovered = cohort_patients
        .iter()
        .filter(|p| !covered.contains_key(*p))
        .cloned()
        .collect();
    Coverage { covered, uncovered }
}

pub fn compute_weights(covered: &BTreeMap<String, BTreeSet<usize>>) -> BTreeMap<String, f64> {
    let counts = covered.values().map(|s| s.len());
    let nh = counts.clone().max().unwrap_or(0);
    let nl = counts.min().unwrap_or(0);
    covered
        .iter()
        .map(|(p, s)| {
            let w = if nh == nl { 1.0 } else { s.len() as f64 / (nh - nl) as f64 };
            (p.clone(), w)
        })
        .collect()
}

/// Nested mean of one patient's patch vectors, scaled by `weight`.
pub fn patient_feature(patient_id: &str, features: &[&PatchFeature], weight: f64) -> Result<PatientFeature> {
    let mut by_cluster: BTreeMap<usize, Vec<&PatchFeature>> = BTreeMap::new();
    for f in features {
        if f.patient_id != patient_id {
            return Err(Error::InvalidArgument(format!(
                "feature {} belongs to {}, not {patient_id}",
                f.patch_id, f.patient_id
            )));
        }
        by_cluster.entry(f.cluster_id).or_default().push(f);
    }
    let Some(dim) = features.first().map(|f| f.vector.len()) else {
        return Err(Error::Data(format!("patient {patient_id} covers no selected cluster")));
    };
    let mut total = vec![0.0; dim];
    for patches in by_cluster.values() {
        let mut cm = vec![0.0; dim];
        for f in patches {
            if f.vector.len() != dim {
                return Err(Error::Shape(format!("feature {} has length {}", f.patch_id, f.vector.len())));
            }
            for (a, v) in cm.iter_mut().zip(&f.vector) {
                *a += v;
            }
        }
        for (t, c) in total.iter_mut().zip(&cm) {
            *t += c / patches.len() as f64;
        }
    }
    let c = by_cluster.len() as f64;
    Ok(PatientFeature {
        patient_id: patient_id.to_string(),
        n_clusters_covered: by_cluster.len(),
        weight,
        vector: total.iter().map(|t| weight * (t / c)).collect(),
    })
}

/// Patient features for every covered patient, in patient-id order, plus the
/// uncovered patients.
pub fn aggregate(features: &[PatchFeature], cohort_patients: &[String]) -> Result<(Vec<PatientFeature>, Vec<String>)> {
    let cov = cluster_coverage(features, cohort_patients);
    let weights = compute_weights(&cov.covered);
    let mut by_patient: BTreeMap<&str, Vec<&PatchFeature>> = BTreeMap::new();
    for f in features {
        by_patient.entry(f.patient_id.as_str()).or_default().push(f);
    }
    let out = by_patient
        .iter()
        .map(|(p, fs)| patient_feature(p, fs, weights[*p]))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, cov.uncovered))
}

pub fn write_patient_features(path: &Path, rows: &[PatientFeature]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.vector.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["patient_id".to_string(), "n_clusters".into(), "weight".into()];
    header.extend((0..dim).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        let mut rec = vec![r.patient_id.clone(), r.n_clusters_covered.to_string(), format!("{:e}", r.weight)];
        // `{:e}` prints the shortest exact representation
        rec.extend(r.vector.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_patient_features(path: &Path) -> Result<Vec<PatientFeature>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let file = path.display().to_string();
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |m: &str| Error::Row {
            file: file.clone(),
            row: i + 1,
            message: m.to_string(),
        };
        if rec.len() < 3 {
            return Err(bad("too few columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        out.push(PatientFeature {
            patient_id: rec[0].to_string(),
            n_clusters_covered: rec[1].parse().map_err(|_| bad("bad n_clusters"))?,
            weight: num(&rec[2])?,
            vector: rec.iter().skip(3).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(patient: &str, cluster: usize, v: &[f64]) -> PatchFeature {
        PatchFeature {
            patch_id: format!("{patient}_{cluster}_{}", v[0]),
            patient_id: patient.into(),
            cluster_id: cluster,
            vector: v.to_vec(),
        }
    }

    #[test]
    fn coverage_is_a_set() {
        let f = vec![pf("a", 1, &[0.0]), pf("a", 1, &[1.0]), pf("a", 3, &[2.0])];
        let cov = cluster_coverage(&f, &["a".into(), "z".into()]);
        assert_eq!(cov.covered["a"], BTreeSet::from([1, 3]));
        assert_eq!(cov.uncovered, vec!["z".to_string()]);
    }

    #[test]
    fn weights_follow_the_ratio() {
        let cov: BTreeMap<String, BTreeSet<usize>> = [
            ("a".to_string(), BTreeSet::from([0])),
            ("b".to_string(), BTreeSet::from([0, 1])),
            ("c".to_string(), BTreeSet::from([0, 1, 2, 3])),
        ]
        .into();
        let w = compute_weights(&cov);
        assert_eq!(w["a"], 1.0 / 3.0);
        assert_eq!(w["b"], 2.0 / 3.0);
        assert_eq!(w["c"], 4.0 / 3.0);
        let flat: BTreeMap<String, BTreeSet<usize>> =
            [("a".to_string(), BTreeSet::from([0, 1, 2])), ("b".to_string(), BTreeSet::from([3, 4, 5]))].into();
        assert!(compute_weights(&flat).values().all(|&w| w == 1.0));
    }

    #[test]
    fn nested_mean_differs_from_pooled() {
        // cluster 0: [0], [2] -> mean 1; cluster 1: [7] -> mean 7
        let f = [pf("a", 0, &[0.0]), pf("a", 0, &[2.0]), pf("a", 1, &[7.0])];
        let refs: Vec<&PatchFeature> = f.iter().collect();
        let out = patient_feature("a", &refs, 0.5).unwrap();
        assert_eq!(out.vector, vec![0.5 * (1.0 + 7.0) / 2.0]);
        assert_ne!(out.vector[0], 0.5 * 9.0 / 3.0);
        assert_eq!(out.n_clusters_covered, 2);
    }

    #[test]
    fn single_patch_and_zero_vectors() {
        let f = [pf("a", 2, &[1.5, -2.0])];
        let out = patient_feature("a", &[&f[0]], 4.0 / 3.0).unwrap();
        assert_eq!(out.vector, vec![4.0 / 3.0 * 1.5, 4.0 / 3.0 * -2.0]);
        let z = [pf("b", 0, &[0.0, 0.0]), pf("b", 1, &[0.0, 0.0])];
        let out = patient_feature("b", &[&z[0], &z[1]], 7.0).unwrap();
        assert_eq!(out.vector, vec![0.0, 0.0]);
        assert!(patient_feature("c", &[], 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![PatientFeature {
            patient_id: "a".into(),
            n_clusters_covered: 2,
            weight: 2.0 / 3.0,
            vector: vec![0.1, -1.0 / 3.0, 1e-300],
        }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pf.csv");
        write_patient_features(&p, &rows).unwrap();
        assert_eq!(read_patient_features(&p).unwrap(), rows);
    }
}
