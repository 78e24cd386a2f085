//! Random patch sampling with background rejection.

use image::RgbImage;
use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PatchManifest;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Patch side in pixels.
    pub side: u32,
    /// Sampling ratio applied to the number of patch-sized tiles.
    pub ratio: f64,
    /// Gray values strictly above this count as background.
    pub bg_gray_threshold: u8,
    /// Patches whose background fraction exceeds this are re-drawn.
    pub bg_area_threshold: f64,
    pub max_retries_per_patch: u32,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            side: 512,
            ratio: 0.05,
            bg_gray_threshold: 200,
            bg_area_threshold: 0.5,
            max_retries_per_patch: 50,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(Error::InvalidArgument("sampler side must be > 0".into()));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sampler ratio must lie in (0, 1], got {}",
                self.ratio
            )));
        }
        if !(self.bg_area_threshold > 0.0 && self.bg_area_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bg_area_threshold must lie in (0, 1], got {}",
                self.bg_area_threshold
            )));
        }
        Ok(())
    }
}

/// Number of patches to draw from an `h`×`w` image: `floor(h·w/s² · ratio)`,
/// at least one.
pub fn patch_budget(h: u32, w: u32, cfg: &SamplerConfig) -> Result<usize> {
    if h < cfg.side || w < cfg.side {
        return Err(Error::InvalidArgument(format!(
            "image {h}x{w} is smaller than one {s}x{s} patch",
            s = cfg.side
        )));
    }
    let tiles = f64::from(h) * f64::from(w) / (f64::from(cfg.side) * f64::from(cfg.side));
    Ok(((tiles * cfg.ratio).floor() as usize).max(1))
}

/// ITU-R 601 luma, rounded half up to an integer in 0..=255.
#[inline]
pub fn gray(px: &image::Rgb<u8>) -> u8 {
    let [r, g, b] = px.0;
    ((299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b) + 500) / 1000) as u8
}

/// Fraction of pixels of the `side`×`side` region at (`x`, `y`) whose gray
/// value exceeds `gray_threshold`.
pub fn background_fraction(image: &RgbImage, x: u32, y: u32, side: u32, gray_threshold: u8) -> f64 {
    let mut bg = 0usize;
    for yy in y..y + side {
        for xx in x..x + side {
            if gray(image.get_pixel(xx, yy)) > gray_threshold {
                bg += 1;
            }
        }
    }
    bg as f64 / (f64::from(side) * f64::from(side))
}

/// Whether a patch at (`x`, `y`) passes the background predicate.
pub fn accepts(image: &RgbImage, x: u32, y: u32, cfg: &SamplerConfig) -> bool {
    background_fraction(image, x, y, cfg.side, cfg.bg_gray_threshold) <= cfg.bg_area_threshold
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub patches: Vec<PatchManifest>,
    pub budget: usize,
    pub rejected_draws: usize,
    /// Budget slots left unfilled after exhausting retries.
    pub shortfall: usize,
}

/// Identifies the image being sampled; used to label the emitted patches.
#[derive(Debug, Clone, Copy)]
pub struct ImageRef<'a> {
    pub patient_id: &'a str,
    pub image_path: &'a str,
    /// Prefix of the generated patch ids.
    pub patch_prefix: &'a str,
}

/// Draws `patch_budget` patch positions uniformly at random, re-drawing any
/// background-dominated patch up to `max_retries_per_patch` times.
pub fn sample_patches(
    image: &RgbImage,
    cfg: &SamplerConfig,
    seed: u64,
    source: ImageRef<'_>,
) -> Result<SampleOutcome> {
    cfg.validate()?;
    let (w, h) = image.dimensions();
    let budget = patch_budget(h, w, cfg)?;
    let mut rng = seed::rng(seed);
    let mut patches = Vec::with_capacity(budget);
    let mut rejected = 0;
    let mut shortfall = 0;
    for _ in 0..budget {
        let mut found = None;
        for _ in 0..=cfg.max_retries_per_patch {
            let x = rng.gen_range(0..=w - cfg.side);
            let y = rng.gen_range(0..=h - cfg.side);
            if accepts(image, x, y, cfg) {
                found = Some((x, y));
                break;
            }
            rejected += 1;
        }
        match found {
            Some((x, y)) => {
                let patch_id = format!("{}_p{:04}", source.patch_prefix, patches.len());
                patches.push(PatchManifest {
                    patch_id,
                    patient_id: source.patient_id.to_string(),
                    image_path: source.image_path.to_string(),
                    x,
                    y,
                    side: cfg.side,
                    cluster: None,
                });
            }
            None => shortfall += 1,
        }
    }
    if shortfall > 0 {
        warn!(
            "{}: only {} of {} patches found after retries (shortfall {})",
            source.image_path,
            patches.len(),
            budget,
            shortfall
        );
    }
    Ok(SampleOutcome {
        patches,
        budget,
        rejected_draws: rejected,
        shortfall,
    })
}

/// Samples many images in parallel. Image `i` uses the seed derived from
/// `(cfg.seed, i)`, so results do not depend on scheduling.
pub fn sample_many(
    images: &[(ImageRef<'_>, &RgbImage)],
    cfg: &SamplerConfig,
) -> Result<Vec<SampleOutcome>> {
    images
        .par_iter()
        .enumerate()
        .map(|(i, (src, img))| sample_patches(img, cfg, seed::derive(cfg.seed, i as u64), *src))
        .collect()
}

/// Copies the patch region out of its source image.
pub fn crop(image: &RgbImage, patch: &PatchManifest) -> RgbImage {
    image::imageops::crop_imm(image, patch.x, patch.y, patch.side, patch.side).to_image()
}
