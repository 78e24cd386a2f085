use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{save_cohort, save_png, Cohort, SurvivalRecord};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_patients: usize,
    pub images_per_patient: usize,
    pub image_side: u32,
    /// Log hazard ratio per unit of latent risk.
    pub signal_strength: f64,
    /// Probability that a patient is censored.
    pub censor_rate: f64,
    /// Hazard at zero latent risk, per day.
    pub base_hazard: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_patients: 60,
            images_per_patient: 1,
            image_side: 192,
            signal_strength: 2.0,
            censor_rate: 0.3,
            base_hazard: 1.0 / 1000.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.images_per_patient == 0 || self.image_side < 8 {
            return Err(Error::InvalidArgument(
                "synthetic cohort needs patients, images and image_side >= 8".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::InvalidArgument(format!(
                "censor_rate must lie in [0, 1), got {}",
                self.censor_rate
            )));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(Error::InvalidArgument("signal_strength must be >= 0".into()));
        }
        if !(self.base_hazard > 0.0 && self.base_hazard.is_finite()) {
            return Err(Error::InvalidArgument("base_hazard must be > 0".into()));
        }
        Ok(())
    }
}

/// A generated cohort with its rendered slides.
#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub cohort: Cohort,
    /// Latent risk per patient, aligned with `cohort.records`.
    pub latent: Vec<f64>,
    /// `(relative image path, image)` in manifest order.
    pub images: Vec<(String, RgbImage)>,
}

pub fn patient_id(i: usize) -> String {
    format!("S{i:04}")
}

/// Tissue darkness in `[0, 1]` for latent risk `r`.
fn darkness(r: f64) -> f64 {
    (0.5 + 0.25 * r).clamp(0.0, 1.0)
}

/// Renders one slide: a tissue ellipse on white background whose base
/// brightness falls and whose dark-blob density rises with latent risk.
pub fn render_slide(side: u32, latent: f64, rng: &mut ChaCha8Rng) -> RgbImage {
    let m = darkness(latent);
    let s = side as f64;
    let (cx, cy) = (s * rng.gen_range(0.45..0.55), s * rng.gen_range(0.45..0.55));
    let (ax, ay) = (s * rng.gen_range(0.42..0.5), s * rng.gen_range(0.42..0.5));
    let base = [225.0 - 80.0 * m, 160.0 - 70.0 * m, 200.0 - 60.0 * m];
    let mut img = RgbImage::from_pixel(side, side, Rgb([245, 245, 245]));
    let inside = |x: f64, y: f64| ((x - cx) / ax).powi(2) + ((y - cy) / ay).powi(2) <= 1.0;
    for (x, y, px) in img.enumerate_pixels_mut() {
        let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
        if inside(xf, yf) {
            let n: f64 = rng.gen_range(-12.0..12.0);
            *px = Rgb(base.map(|c| (c + n).clamp(0.0, 255.0) as u8));
        }
    }
    // nuclei-like blobs, density per 1000 tissue pixels
    let area = std::f64::consts::PI * ax * ay;
    let n_blobs = (area / 1000.0 * (1.0 + 9.0 * m)).round() as usize;
    for _ in 0..n_blobs {
        let (bx, by) = (rng.gen_range(0.0..s), rng.gen_range(0.0..s));
        if !inside(bx, by) {
            continue;
        }
        let r: f64 = rng.gen_range(1.5..3.5);
        let shade: f64 = rng.gen_range(0.0..30.0);
        let color = Rgb([(70.0 + shade) as u8, (30.0 + shade) as u8, (100.0 + shade) as u8]);
        let (x0, x1) = ((bx - r).floor().max(0.0) as u32, ((bx + r).ceil() as u32).min(side - 1));
        let (y0, y1) = ((by - r).floor().max(0.0) as u32, ((by + r).ceil() as u32).min(side - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 + 0.5 - bx, y as f64 + 0.5 - by);
                if dx * dx + dy * dy <= r * r {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    img
}

/// Draws latent risks, exponential survival times and censoring, and renders
/// the slides. Deterministic per `spec.seed`.
pub fn generate_cohort(spec: &SynthSpec) -> Result<SynthCohort> {
    spec.validate()?;
    let per_patient: Vec<(SurvivalRecord, f64, Vec<(String, RgbImage)>)> = (0..spec.n_patients)
        .into_par_iter()
        .map(|i| {
            let id = patient_id(i);
            let mut rng = seed::rng(seed::derive(spec.seed, i as u64));
            let r: f64 = StandardNormal.sample(&mut rng);
            let rate = spec.base_hazard * (spec.signal_strength * r).exp();
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let t = -u.ln() / rate;
            let censored = rng.gen_bool(spec.censor_rate);
            let observed = if censored { t * rng.gen_range(0.0..1.0) } else { t };
            let time = ((observed * 10.0).round() / 10.0).max(0.1);
            let images = (0..spec.images_per_patient)
                .map(|k| (format!("images/{id}_{k}.png"), render_slide(spec.image_side, r, &mut rng)))
                .collect();
            (SurvivalRecord::new(id, time, !censored), r, images)
        })
        .collect();
    let mut records = Vec::with_capacity(spec.n_patients);
    let mut latent = Vec::with_capacity(spec.n_patients);
    let mut images = Vec::new();
    let mut manifest = BTreeMap::new();
    for (rec, r, imgs) in per_patient {
        manifest.insert(rec.patient_id.clone(), imgs.iter().map(|(p, _)| p.clone()).collect());
        records.push(rec);
        latent.push(r);
        images.extend(imgs);
    }
    Ok(SynthCohort {
        cohort: Cohort::new(records, manifest)?,
        latent,
        images,
    })
}

/// Writes `clinical.csv`, `images.csv` and the PNGs under `dir`.
pub fn write_synthetic(dir: &Path, synth: &SynthCohort) -> Result<()> {
    std::fs::create_dir_all(dir.join("images")).map_err(|e| Error::io(dir, e))?;
    synth
        .images
        .par_iter()
        .try_for_each(|(rel, img)| save_png(&dir.join(rel), img))?;
    save_cohort(&synth.cohort, &dir.join("clinical.csv"), &dir.join("images.csv"))
}
