//! Forward and backward kernels for the spatial operators.
//!
//! Batch items are processed in parallel; every reduction across the batch
//! is summed in batch order so results are bit-reproducible.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output side `ceil(in / stride)`, zero padding split evenly (extra on
    /// the bottom/right).
    Same,
    /// No padding; output side `floor((in - k) / stride) + 1`.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub ic: usize,
    pub ih: usize,
    pub iw: usize,
    pub oc: usize,
    pub k: usize,
    pub oh: usize,
    pub ow: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

fn out_and_pad(input: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if input < k {
                return Err(Error::Shape(format!(
                    "valid convolution with kernel {k} on input side {input}"
                )));
            }
            Ok(((input - k) / stride + 1, 0))
        }
    }
}

impl ConvGeom {
    pub fn new(input: [usize; 4], kernel: [usize; 4], stride: usize, padding: Padding) -> Result<Self> {
        let [n, ic, ih, iw] = input;
        let [oc, kic, kh, kw] = kernel;
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        if kic != ic {
            return Err(Error::Shape(format!(
                "kernel expects {kic} input channels, input has {ic}"
            )));
        }
        if kh != kw {
            return Err(Error::Shape(format!("only square kernels supported, got {kh}x{kw}")));
        }
        let (oh, pad_top) = out_and_pad(ih, kh, stride, padding)?;
        let (ow, pad_left) = out_and_pad(iw, kw, stride, padding)?;
        Ok(Self {
            n,
            ic,
            ih,
            iw,
            oc,
            k: kh,
            oh,
            ow,
            stride,
            pad_top,
            pad_left,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.oc, self.oh, self.ow]
    }

    /// Output positions `o` in `[lo, hi)` whose input coordinate
    /// `o·stride + off − pad` lies inside `[0, len)`.
    fn valid_range(&self, out_len: usize, in_len: usize, off: usize, pad: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let shift = off as isize - pad as isize;
        let lo = if shift >= 0 { 0 } else { ((-shift) + s - 1) / s };
        let top = in_len as isize - 1 - shift;
        if top < 0 {
            return (0, 0);
        }
        let hi = ((top / s) + 1).min(out_len as isize);
        (lo as usize, hi.max(lo) as usize)
    }
}

pub(crate) fn conv2d_forward(g: &ConvGeom, input: &[f64], kernel: &[f64]) -> Vec<f64> {
    let in_item = g.ic * g.ih * g.iw;
    let out_item = g.oc * g.oh * g.ow;
    let mut out = vec![0.0; g.n * out_item];
    out.par_chunks_mut(out_item)
        .zip(input.par_chunks(in_item))
        .for_each(|(o, x)| conv_item(g, x, kernel, o));
    out
}

fn conv_item(g: &ConvGeom, x: &[f64], kernel: &[f64], out: &mut [f64]) {
    let plane_in = g.ih * g.iw;
    let plane_out = g.oh * g.ow;
    for oc in 0..g.oc {
        let o = &mut out[oc * plane_out..(oc + 1) * plane_out];
        for ic in 0..g.ic {
            let xp = &x[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..g.k {
                let (ylo, yhi) = g.valid_range(g.oh, g.ih, ky, g.pad_top);
                for kx in 0..g.k {
                    let w = kernel[((oc * g.ic + ic) * g.k + ky) * g.k + kx];
                    if w == 0.0 {
                        continue;
                    }
                    let (xlo, xhi) = g.valid_range(g.ow, g.iw, kx, g.pad_left);
                    for oy in ylo..yhi {
                        let iy = oy * g.stride + ky - g.pad_top;
                        let row = &xp[iy * g.iw..(iy + 1) * g.iw];
                        let orow = &mut o[oy * g.ow..(oy + 1) * g.ow];
                        if g.stride == 1 {
                            if xhi <= xlo {
                                continue;
                            }
                            let start = xlo + kx - g.pad_left;
                            let src = &row[start..start + (xhi - xlo)];
                            for (ov, iv) in orow[xlo..xhi].iter_mut().zip(src) {
                                *ov += w * iv;
                            }
                        } else {
                            for ox in xlo..xhi {
                                orow[ox] += w * row[ox * g.stride + kx - g.pad_left];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Returns `(grad_input, grad_kernel)`.
pub(crate) fn conv2d_backward(
    g: &ConvGeom,
    input: &[f64],
    kernel: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let in_item = g.ic * g.ih * g.iw;
    let out_item = g.oc * g.oh * g.ow;
    let klen = kernel.len();
    let per_item: Vec<(Vec<f64>, Vec<f64>)> = input
        .par_chunks(in_item)
        .zip(grad_out.par_chunks(out_item))
        .map(|(x, go)| {
            let mut gi = vec![0.0; in_item];
            let mut gk = vec![0.0; klen];
            conv_item_backward(g, x, kernel, go, &mut gi, &mut gk);
            (gi, gk)
        })
        .collect();
    let mut grad_in = Vec::with_capacity(input.len());
    let mut grad_k = vec![0.0; klen];
    for (gi, gk) in per_item {
        grad_in.extend_from_slice(&gi);
        for (a, b) in grad_k.iter_mut().zip(&gk) {
            *a += b;
        }
    }
    (grad_in, grad_k)
}

fn conv_item_backward(
    g: &ConvGeom,
    x: &[f64],
    kernel: &[f64],
    go: &[f64],
    gi: &mut [f64],
    gk: &mut [f64],
) {
    let plane_in = g.ih * g.iw;
    let plane_out = g.oh * g.ow;
    for oc in 0..g.oc {
        let gop = &go[oc * plane_out..(oc + 1) * plane_out];
        for ic in 0..g.ic {
            let xp = &x[ic * plane_in..(ic + 1) * plane_in];
            let gip = &mut gi[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..g.k {
                let (ylo, yhi) = g.valid_range(g.oh, g.ih, ky, g.pad_top);
                for kx in 0..g.k {
                    let widx = ((oc * g.ic + ic) * g.k + ky) * g.k + kx;
                    let w = kernel[widx];
                    let (xlo, xhi) = g.valid_range(g.ow, g.iw, kx, g.pad_left);
                    let mut acc = 0.0;
                    for oy in ylo..yhi {
                        let iy = oy * g.stride + ky - g.pad_top;
                        let grow = &gop[oy * g.ow..(oy + 1) * g.ow];
                        for ox in xlo..xhi {
                            let ix = iy * g.iw + ox * g.stride + kx - g.pad_left;
                            let d = grow[ox];
                            acc += d * xp[ix];
                            gip[ix] += d * w;
                        }
                    }
                    gk[widx] += acc;
                }
            }
        }
    }
}

/// Non-overlapping `window`×`window` max pooling (floor on the output size).
/// Returns the output and, per output element, the flat input index of the
/// first maximum.
pub(crate) fn maxpool_forward(dims: [usize; 4], input: &[f64], window: usize) -> (Vec<f64>, Vec<usize>, [usize; 4]) {
    let [n, c, h, w] = dims;
    let (oh, ow) = (h / window, w / window);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * window * w + ox * window;
                for dy in 0..window {
                    for dx in 0..window {
                        let idx = base + (oy * window + dy) * w + ox * window + dx;
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg, [n, c, oh, ow])
}
