//! Core domain types, CSV ingestion and patient-level fold splitting.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One patient's survival label. `time` is in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub patient_id: String,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(patient_id: impl Into<String>, time: f64, event: bool) -> Self {
        Self {
            patient_id: patient_id.into(),
            time,
            event,
        }
    }
}

/// Validated set of patients plus the images belonging to each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort {
    pub records: Vec<SurvivalRecord>,
    pub image_manifest: BTreeMap<String, Vec<String>>,
}

impl Cohort {
    pub fn new(
        records: Vec<SurvivalRecord>,
        image_manifest: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if r.patient_id.is_empty() {
                return Err(Error::Data("empty patient_id".into()));
            }
            if !(r.time >= 0.0) || !r.time.is_finite() {
                return Err(Error::Data(format!(
                    "patient {} has invalid time {}",
                    r.patient_id, r.time
                )));
            }
            if !seen.insert(r.patient_id.as_str()) {
                return Err(Error::DuplicatePatient(r.patient_id.clone()));
            }
        }
        for key in image_manifest.keys() {
            if !seen.contains(key.as_str()) {
                return Err(Error::UnknownPatient(key.clone()));
            }
        }
        Ok(Self {
            records,
            image_manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn record(&self, patient_id: &str) -> Option<&SurvivalRecord> {
        self.records.iter().find(|r| r.patient_id == patient_id)
    }

    /// Errors unless the cohort can support a Cox fit (at least two events).
    pub fn require_cox_fittable(&self) -> Result<()> {
        if self.n_events() < 2 {
            return Err(Error::Data(format!(
                "a Cox fit needs at least 2 events, cohort has {}",
                self.n_events()
            )));
        }
        Ok(())
    }

    /// Sub-cohort holding the given record indices (in the order given).
    pub fn subset(&self, indices: &[usize]) -> Cohort {
        let records: Vec<SurvivalRecord> =
            indices.iter().map(|&i| self.records[i].clone()).collect();
        let image_manifest = records
            .iter()
            .filter_map(|r| {
                self.image_manifest
                    .get(&r.patient_id)
                    .map(|v| (r.patient_id.clone(), v.clone()))
            })
            .collect();
        Cohort {
            records,
            image_manifest,
        }
    }
}

/// A sampled patch and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchManifest {
    pub patch_id: String,
    pub patient_id: String,
    pub image_path: String,
    pub x: u32,
    pub y: u32,
    pub side: u32,
    pub cluster: Option<usize>,
}

impl PatchManifest {
    /// Checks the geometric invariants against the source image size and
    /// the cluster count, when known.
    pub fn validate(&self, image_w: u32, image_h: u32, n_clusters: Option<usize>) -> Result<()> {
        if self.side == 0 {
            return Err(Error::Data(format!("patch {} has zero side", self.patch_id)));
        }
        if u64::from(self.x) + u64::from(self.side) > u64::from(image_w)
            || u64::from(self.y) + u64::from(self.side) > u64::from(image_h)
        {
            return Err(Error::Data(format!(
                "patch {} exceeds image bounds {}x{}",
                self.patch_id, image_w, image_h
            )));
        }
        if let (Some(c), Some(p)) = (self.cluster, n_clusters) {
            if c >= p {
                return Err(Error::Data(format!(
                    "patch {} has cluster {} outside [0, {})",
                    self.patch_id, c, p
                )));
            }
        }
        Ok(())
    }
}

fn parse_event(raw: &str) -> Option<bool> {
    match raw.trim() {
        "1" => Some(true),
        "0" => Some(false),
        _ => None,
    }
}

fn expect_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Data(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads a clinical CSV (`patient_id,time,event`).
pub fn read_clinical(path: &Path) -> Result<Vec<SurvivalRecord>> {
    let file_name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    expect_header(path, &headers, &["patient_id", "time", "event"])?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::csv(path, e))?;
        let err = |message: String| Error::Row {
            file: file_name.clone(),
            row: row_no,
            message,
        };
        let id = row.get(0).map(str::trim).unwrap_or("");
        if id.is_empty() {
            return Err(err("missing patient_id".into()));
        }
        let time_raw = row.get(1).map(str::trim).unwrap_or("");
        if time_raw.is_empty() {
            return Err(err("missing time".into()));
        }
        let time: f64 = time_raw
            .parse()
            .map_err(|_| err(format!("unparseable time `{time_raw}`")))?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(format!("negative or non-finite time {time_raw}")));
        }
        let event_raw = row.get(2).map(str::trim).unwrap_or("");
        if event_raw.is_empty() {
            return Err(err("missing event".into()));
        }
        let event = parse_event(event_raw)
            .ok_or_else(|| err(format!("event must be 0 or 1, got `{event_raw}`")))?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicatePatient(id.to_string()));
        }
        records.push(SurvivalRecord::new(id, time, event));
    }
    Ok(records)
}

/// Reads an image manifest CSV (`patient_id,image_path`).
pub fn read_image_manifest(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    expect_header(path, &headers, &["patient_id", "image_path"])?;
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let id = row.get(0).map(str::trim).unwrap_or("");
        let img = row.get(1).map(str::trim).unwrap_or("");
        if id.is_empty() || img.is_empty() {
            return Err(Error::Row {
                file: path.display().to_string(),
                row: i + 1,
                message: "empty patient_id or image_path".into(),
            });
        }
        map.entry(id.to_string()).or_default().push(img.to_string());
    }
    Ok(map)
}

/// Loads and validates a cohort from the clinical table and image manifest.
pub fn load_cohort(clinical_path: &Path, manifest_path: &Path) -> Result<Cohort> {
    let records = read_clinical(clinical_path)?;
    let manifest = read_image_manifest(manifest_path)?;
    Cohort::new(records, manifest)
}

/// Writes the clinical table and image manifest of `cohort`.
pub fn save_cohort(cohort: &Cohort, clinical_path: &Path, manifest_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(clinical_path).map_err(|e| Error::csv(clinical_path, e))?;
    w.write_record(["patient_id", "time", "event"])
        .map_err(|e| Error::csv(clinical_path, e))?;
    for r in &cohort.records {
        w.write_record([
            r.patient_id.as_str(),
            &r.time.to_string(),
            if r.event { "1" } else { "0" },
        ])
        .map_err(|e| Error::csv(clinical_path, e))?;
    }
    w.flush().map_err(|e| Error::io(clinical_path, e))?;

    let mut w = csv::Writer::from_path(manifest_path).map_err(|e| Error::csv(manifest_path, e))?;
    w.write_record(["patient_id", "image_path"])
        .map_err(|e| Error::csv(manifest_path, e))?;
    for (id, images) in &cohort.image_manifest {
        for img in images {
            w.write_record([id.as_str(), img.as_str()])
                .map_err(|e| Error::csv(manifest_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(manifest_path, e))?;
    Ok(())
}

pub fn read_patch_manifest(path: &Path) -> Result<Vec<PatchManifest>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    expect_header(
        path,
        &headers,
        &["patch_id", "patient_id", "image_path", "x", "y", "side", "cluster"],
    )?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let p: PatchManifest = row.map_err(|e| Error::Row {
            file: path.display().to_string(),
            row: i + 1,
            message: e.to_string(),
        })?;
        if p.side == 0 {
            return Err(Error::Row {
                file: path.display().to_string(),
                row: i + 1,
                message: "side must be positive".into(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_patch_manifest(path: &Path, patches: &[PatchManifest]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    // serde skips the header when there are no rows
    if patches.is_empty() {
        w.write_record(["patch_id", "patient_id", "image_path", "x", "y", "side", "cluster"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for p in patches {
        w.serialize(p).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Assigns each of `n` items to one of `k` folds.
///
/// Items are shuffled with `seed` and dealt into contiguous chunks, so fold
/// sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} is larger than the number of items ({n})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &idx in &order[pos..pos + size] {
            folds[idx] = f;
        }
        pos += size;
    }
    Ok(folds)
}

/// Patient-level k-fold split. Returns `(train, test)` pairs; the test parts
/// partition the cohort.
pub fn split_k_fold(cohort: &Cohort, k: usize, seed: u64) -> Result<Vec<(Cohort, Cohort)>> {
    let folds = fold_assignment(cohort.len(), k, seed)?;
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..cohort.len()).partition(|&i| folds[i] == f);
            (cohort.subset(&train), cohort.subset(&test))
        })
        .collect())
}

/// Writes `contents` to `path` via a sibling temp file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp~");
    let tmp = path.with_file_name(name);
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Decodes an image file to 8-bit RGB.
pub fn load_rgb(path: &Path) -> Result<image::RgbImage> {
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8())
}

/// Encodes `img` as PNG at `path`.
pub fn save_png(path: &Path, img: &image::RgbImage) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::image(path, e))?;
    write_atomic(path, &bytes)
}
