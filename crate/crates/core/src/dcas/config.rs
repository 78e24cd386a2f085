use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcasConfig {
    /// Patch side fed to the network.
    pub input_side: usize,
    pub channels: usize,
    pub cbam_reduce: usize,
    pub nam_reduce: usize,
    pub feature_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_half_every: usize,
    pub seed: u64,
}

impl Default for DcasConfig {
    fn default() -> Self {
        Self {
            input_side: 512,
            channels: 32,
            cbam_reduce: 4,
            nam_reduce: 32,
            feature_dim: 32,
            epochs: 150,
            batch_size: 256,
            lr0: 0.1,
            lr_half_every: 20,
            seed: 0,
        }
    }
}

/// Spatial side after each stage of the network for an `input` side:
/// conv1_1 (stride 4), pool, conv2_1 (stride 2), conv3 (stride 2), pool.
pub fn spatial_chain(input: usize) -> Result<[usize; 5]> {
    let s1 = input.div_ceil(4);
    let p1 = s1 / 2;
    let s2 = p1.div_ceil(2);
    let s3 = s2.div_ceil(2);
    let p3 = s3 / 2;
    if input == 0 || p1 == 0 || p3 == 0 {
        return Err(Error::Shape(format!(
            "input side {input} is too small for the stride/pool chain"
        )));
    }
    Ok([s1, p1, s2, s3, p3])
}

impl DcasConfig {
    /// Scaled-down profile: 64-pixel patches, batch 32, 30 epochs.
    pub fn desk() -> Self {
        Self {
            input_side: 64,
            epochs: 30,
            batch_size: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.cbam_reduce == 0 || !self.channels.is_multiple_of(self.cbam_reduce) {
            return Err(Error::InvalidArgument(format!(
                "cbam_reduce {} must divide channels {}",
                self.cbam_reduce, self.channels
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be > 0".into()));
        }
        let flat = self.flatten_len()?;
        if self.nam_reduce == 0 || flat % self.nam_reduce != 0 {
            return Err(Error::InvalidArgument(format!(
                "nam_reduce {} must divide the flatten length {flat}",
                self.nam_reduce
            )));
        }
        if self.batch_size == 0 || self.lr_half_every == 0 {
            return Err(Error::InvalidArgument("batch_size and lr_half_every must be > 0".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr0 must be positive, got {}", self.lr0)));
        }
        Ok(())
    }

    /// Length of the flattened Part 3 output.
    pub fn flatten_len(&self) -> Result<usize> {
        let p3 = spatial_chain(self.input_side)?[4];
        Ok(self.channels * p3 * p3)
    }

    /// Learning rate for a zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * 0.5f64.powi((epoch / self.lr_half_every) as i32)
    }
}
