use image::RgbImage;

use crate::error::{Error, Result};
use crate::sampler::gray;

/// For each output index, the source indices it overlaps and their overlap
/// measured in units of `1/dst` source pixels. Weights of one output sum to
/// `src`.
fn area_weights(src: u32, dst: u32) -> Vec<Vec<(u32, u64)>> {
    let (src, dst) = (u64::from(src), u64::from(dst));
    (0..dst)
        .map(|o| {
            let lo = o * src;
            let hi = (o + 1) * src;
            (lo / dst..hi.div_ceil(dst))
                .filter_map(|s| {
                    let overlap = hi.min((s + 1) * dst).saturating_sub(lo.max(s * dst));
                    (overlap > 0).then_some((s as u32, overlap))
                })
                .collect()
        })
        .collect()
}

/// Area-averaged grayscale thumbnail of a square patch, flattened row-major
/// and scaled to `[0, 1]`.
pub fn thumbnail_embed(patch: &RgbImage, thumb_side: u32) -> Result<Vec<f64>> {
    let (w, h) = patch.dimensions();
    if w != h || w == 0 {
        return Err(Error::Shape(format!("thumbnail input must be square, got {w}x{h}")));
    }
    if thumb_side == 0 || thumb_side > w {
        return Err(Error::InvalidArgument(format!(
            "thumbnail side {thumb_side} must be in [1, {w}]"
        )));
    }
    let weights = area_weights(w, thumb_side);
    let total = u64::from(w) * u64::from(w);
    let mut out = Vec::with_capacity((thumb_side * thumb_side) as usize);
    for wy in &weights {
        for wx in &weights {
            let mut acc: u64 = 0;
            for &(sy, ay) in wy {
                for &(sx, ax) in wx {
                    acc += ay * ax * u64::from(gray(patch.get_pixel(sx, sy)));
                }
            }
            out.push(acc as f64 / total as f64 / 255.0);
        }
    }
    Ok(out)
}
