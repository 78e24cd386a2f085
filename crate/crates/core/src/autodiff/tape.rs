//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and enough saved
//! state to run its backward rule. Nodes are only ever appended, so the tape
//! is already in topological order and [`Tape::backward`] is a single reverse
//! sweep.

use super::kernels::{self, ConvGeom, Padding};
use super::tensor::{strides, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running moments of a batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormStats {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormStats {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { input: Var, kernel: Var, geom: ConvGeom },
    MaxPool { input: Var, argmax: Vec<usize> },
    BatchNorm { input: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, train: bool },
    Relu(Var),
    Sigmoid(Var),
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    MatMul { a: Var, b: Var },
    MeanOver { input: Var, axis: usize },
    MaxOver { input: Var, argmax: Vec<usize> },
    Concat { inputs: Vec<Var>, axis: usize },
    Reshape(Var),
    Sum(Var),
    Custom { input: Var, grad: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros if `v` does not reach
    /// the loss.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = &self.shapes[v.0];
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    pub fn get_raw(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

/// (outer, axis length, inner) split of `shape` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// For each element of a tensor of shape `full`, the flat index of the
/// element of `part` it broadcasts from. `part` must have the same rank with
/// every dimension equal to `full`'s or 1.
fn broadcast_map(full: &[usize], part: &[usize]) -> Result<Option<Vec<usize>>> {
    if full == part {
        return Ok(None);
    }
    if full.len() != part.len()
        || full.iter().zip(part).any(|(&f, &p)| p != f && p != 1)
    {
        return Err(Error::Shape(format!("cannot broadcast {part:?} to {full:?}")));
    }
    let ps = strides(part);
    let eff: Vec<usize> = part
        .iter()
        .zip(&ps)
        .map(|(&d, &s)| if d == 1 { 0 } else { s })
        .collect();
    let n: usize = full.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; full.len()];
    let mut off = 0usize;
    for _ in 0..n {
        map.push(off);
        for d in (0..full.len()).rev() {
            idx[d] += 1;
            off += eff[d];
            if idx[d] < full[d] {
                break;
            }
            off -= eff[d] * idx[d];
            idx[d] = 0;
        }
    }
    Ok(Some(map))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Adds a leaf. Only leaves created with `requires_grad = true` (and the
    /// nodes computed from them) receive gradients.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Cross-correlation of an NCHW input with an `[out, in, k, k]` kernel.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, padding: Padding) -> Result<Var> {
        let x = self.value(input);
        let k = self.value(kernel);
        let geom = ConvGeom::new(x.dims4()?, k.dims4()?, stride, padding)?;
        let out = kernels::conv2d_forward(&geom, x.data(), k.data());
        let value = Tensor::new(geom.out_shape().to_vec(), out)?;
        let rg = self.rg(&[input, kernel]);
        Ok(self.push(value, Op::Conv2d { input, kernel, geom }, rg))
    }

    /// Non-overlapping max pooling; the gradient goes to the first maximum of
    /// each window.
    pub fn maxpool2d(&mut self, input: Var, window: usize) -> Result<Var> {
        let x = self.value(input);
        let dims = x.dims4()?;
        if window == 0 || dims[2] < window || dims[3] < window {
            return Err(Error::Shape(format!(
                "max pool window {window} on spatial size {}x{}",
                dims[2], dims[3]
            )));
        }
        let (out, argmax, od) = kernels::maxpool_forward(dims, x.data(), window);
        let value = Tensor::new(od.to_vec(), out)?;
        let rg = self.rg(&[input]);
        Ok(self.push(value, Op::MaxPool { input, argmax }, rg))
    }

    /// Per-channel batch normalization of an NCHW tensor. Train mode
    /// normalizes with batch moments and folds them into `stats`; eval mode
    /// uses the running moments and leaves `stats` untouched.
    pub fn batchnorm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: &mut BatchNormStats,
        mode: Mode,
    ) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            return Err(Error::Shape(format!("batchnorm affine parameters must have shape [{c}]")));
        }
        if stats.running_mean.len() != c {
            return Err(Error::Shape("batchnorm running stats channel mismatch".into()));
        }
        let plane = h * w;
        let m = (n * plane) as f64;
        let x = self.value(input).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = vec![0.0; x.len()];
        let mut out = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += x[(i * c + ch) * plane..(i * c + ch + 1) * plane].iter().sum::<f64>();
                    }
                    let mean = s / m;
                    let mut v = 0.0;
                    for i in 0..n {
                        v += x[(i * c + ch) * plane..(i * c + ch + 1) * plane]
                            .iter()
                            .map(|xv| (xv - mean) * (xv - mean))
                            .sum::<f64>();
                    }
                    let var = v / m;
                    let unbiased = if m > 1.0 { v / (m - 1.0) } else { var };
                    stats.running_mean[ch] =
                        stats.momentum * stats.running_mean[ch] + (1.0 - stats.momentum) * mean;
                    stats.running_var[ch] =
                        stats.momentum * stats.running_var[ch] + (1.0 - stats.momentum) * unbiased;
                    (mean, var)
                }
                Mode::Eval => (stats.running_mean[ch], stats.running_var[ch]),
            };
            let inv = 1.0 / (var + stats.eps).sqrt();
            inv_std[ch] = inv;
            for i in 0..n {
                let r = (i * c + ch) * plane..(i * c + ch + 1) * plane;
                for j in r {
                    let xh = (x[j] - mean) * inv;
                    xhat[j] = xh;
                    out[j] = g[ch] * xh + b[ch];
                }
            }
        }
        let value = Tensor::new(vec![n, c, h, w], out)?;
        let rg = self.rg(&[input, gamma, beta]);
        Ok(self.push(
            value,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                train: mode == Mode::Train,
            },
            rg,
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let value = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v.max(0.0)).collect())
            .expect("same shape");
        let rg = self.rg(&[input]);
        self.push(value, Op::Relu(input), rg)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let value = Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| sigmoid(v)).collect())
            .expect("same shape");
        let rg = self.rg(&[input]);
        self.push(value, Op::Sigmoid(input), rg)
    }

    fn binary(&mut self, a: Var, b: Var, mul: bool) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let map = broadcast_map(av.shape(), bv.shape())?;
        let (ad, bd) = (av.data(), bv.data());
        let out: Vec<f64> = match (&map, mul) {
            (None, false) => ad.iter().zip(bd).map(|(x, y)| x + y).collect(),
            (None, true) => ad.iter().zip(bd).map(|(x, y)| x * y).collect(),
            (Some(m), false) => ad.iter().zip(m).map(|(x, &j)| x + bd[j]).collect(),
            (Some(m), true) => ad.iter().zip(m).map(|(x, &j)| x * bd[j]).collect(),
        };
        let value = Tensor::new(av.shape().to_vec(), out)?;
        let rg = self.rg(&[a, b]);
        let op = if mul { Op::Mul { a, b } } else { Op::Add { a, b } };
        Ok(self.push(value, op, rg))
    }

    /// `a + b`, with `b` broadcast over its size-1 dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, false)
    }

    /// `a ⊗ b`, with `b` broadcast over its size-1 dimensions.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, true)
    }

    /// `[m, k] × [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let [m, k] = self.value(a).dims2()?;
        let [k2, n] = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul [{m}, {k}] x [{k2}, {n}]")));
        }
        let ad = self.value(a).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let av = ad[i * k + p];
                for (o, bv) in orow.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                    *o += av * bv;
                }
            }
        }
        let value = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul { a, b }, rg))
    }

    /// Mean over `axis`, keeping it with size 1.
    pub fn mean_over(&mut self, input: Var, axis: usize) -> Result<Var> {
        let x = self.value(input);
        if axis >= x.ndim() {
            return Err(Error::Shape(format!("axis {axis} out of range for {:?}", x.shape())));
        }
        let (outer, len, inner) = split_axis(x.shape(), axis);
        let d = x.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let src = &d[(o * len + a) * inner..(o * len + a + 1) * inner];
                for (acc, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *acc += v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= len as f64);
        let mut shape = x.shape().to_vec();
        shape[axis] = 1;
        let value = Tensor::new(shape, out)?;
        let rg = self.rg(&[input]);
        Ok(self.push(value, Op::MeanOver { input, axis }, rg))
    }

    /// Max over `axis`, keeping it with size 1; ties route the gradient to
    /// the first maximum.
    pub fn max_over(&mut self, input: Var, axis: usize) -> Result<Var> {
        let x = self.value(input);
        if axis >= x.ndim() {
            return Err(Error::Shape(format!("axis {axis} out of range for {:?}", x.shape())));
        }
        let (outer, len, inner) = split_axis(x.shape(), axis);
        let d = x.data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let mut best = o * len * inner + i;
                for a in 1..len {
                    let idx = (o * len + a) * inner + i;
                    if d[idx] > d[best] {
                        best = idx;
                    }
                }
                out.push(d[best]);
                argmax.push(best);
            }
        }
        let mut shape = x.shape().to_vec();
        shape[axis] = 1;
        let value = Tensor::new(shape, out)?;
        let rg = self.rg(&[input]);
        Ok(self.push(value, Op::MaxOver { input, argmax }, rg))
    }

    /// Concatenation along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .value(*inputs.first().ok_or_else(|| Error::Shape("empty concat".into()))?)
            .shape()
            .to_vec();
        if axis >= first.len() {
            return Err(Error::Shape(format!("axis {axis} out of range for {first:?}")));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.value(*v).shape();
            if s.len() != first.len()
                || s.iter().enumerate().any(|(d, &x)| d != axis && x != first[d])
            {
                return Err(Error::Shape(format!("concat {s:?} with {first:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let x = self.value(*v);
                let len = x.shape()[axis];
                out.extend_from_slice(&x.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let value = Tensor::new(shape, out)?;
        let rg = self.rg(inputs);
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Channel concatenation of NCHW tensors.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        self.concat(inputs, 1)
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).reshaped(shape)?;
        let rg = self.rg(&[input]);
        Ok(self.push(value, Op::Reshape(input), rg))
    }

    /// NCHW → N×C×1×1 spatial mean.
    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        let flat = self.reshape(input, &[n, c, h * w])?;
        let m = self.mean_over(flat, 2)?;
        self.reshape(m, &[n, c, 1, 1])
    }

    /// NCHW → N×C×1×1 spatial max.
    pub fn global_max_pool(&mut self, input: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        let flat = self.reshape(input, &[n, c, h * w])?;
        let m = self.max_over(flat, 2)?;
        self.reshape(m, &[n, c, 1, 1])
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).data().iter().sum();
        let rg = self.rg(&[input]);
        self.push(Tensor::scalar(s), Op::Sum(input), rg)
    }

    /// A scalar function of `input` whose value and gradient were computed
    /// outside the tape.
    pub fn custom_scalar(&mut self, input: Var, value: f64, grad: Vec<f64>) -> Result<Var> {
        if grad.len() != self.value(input).numel() {
            return Err(Error::Shape("custom gradient length mismatch".into()));
        }
        let rg = self.rg(&[input]);
        Ok(self.push(Tensor::scalar(value), Op::Custom { input, grad }, rg))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(gout) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.requires_grad {
                self.backward_node(node, &gout, &mut grads)?;
            }
            grads[id] = Some(gout);
        }
        Ok(Gradients {
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            grads,
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(g),
        }
    }

    fn backward_node(&self, node: &Node, gout: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, geom } => {
                let (gi, gk) = kernels::conv2d_backward(
                    geom,
                    self.value(*input).data(),
                    self.value(*kernel).data(),
                    gout,
                );
                self.accumulate(grads, *input, gi);
                self.accumulate(grads, *kernel, gk);
            }
            Op::MaxPool { input, argmax } => {
                let mut gi = vec![0.0; self.value(*input).numel()];
                for (g, &idx) in gout.iter().zip(argmax) {
                    gi[idx] += g;
                }
                self.accumulate(grads, *input, gi);
            }
            Op::BatchNorm { input, gamma, beta, xhat, inv_std, train } => {
                let [n, c, h, w] = self.value(*input).dims4()?;
                let plane = h * w;
                let m = (n * plane) as f64;
                let gv = self.value(*gamma).data();
                let mut gi = vec![0.0; gout.len()];
                let mut gg = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for ch in 0..c {
                    let ranges = (0..n).map(|i| (i * c + ch) * plane..(i * c + ch + 1) * plane);
                    let (mut sdy, mut sdyx) = (0.0, 0.0);
                    for r in ranges.clone() {
                        for j in r {
                            sdy += gout[j];
                            sdyx += gout[j] * xhat[j];
                        }
                    }
                    gg[ch] = sdyx;
                    gb[ch] = sdy;
                    let k = gv[ch] * inv_std[ch];
                    for r in ranges {
                        for j in r {
                            gi[j] = if *train {
                                k * (gout[j] - sdy / m - xhat[j] * sdyx / m)
                            } else {
                                k * gout[j]
                            };
                        }
                    }
                }
                self.accumulate(grads, *input, gi);
                self.accumulate(grads, *gamma, gg);
                self.accumulate(grads, *beta, gb);
            }
            Op::Relu(input) => {
                let x = self.value(*input).data();
                let gi = gout
                    .iter()
                    .zip(x)
                    .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *input, gi);
            }
            Op::Sigmoid(input) => {
                let y = node.value.data();
                let gi = gout.iter().zip(y).map(|(g, s)| g * s * (1.0 - s)).collect();
                self.accumulate(grads, *input, gi);
            }
            Op::Add { a, b } => {
                let map = broadcast_map(self.value(*a).shape(), self.value(*b).shape())?;
                self.accumulate(grads, *a, gout.to_vec());
                if self.nodes[b.0].requires_grad {
                    let gb = match map {
                        None => gout.to_vec(),
                        Some(m) => {
                            let mut gb = vec![0.0; self.value(*b).numel()];
                            for (g, j) in gout.iter().zip(m) {
                                gb[j] += g;
                            }
                            gb
                        }
                    };
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Mul { a, b } => {
                let map = broadcast_map(self.value(*a).shape(), self.value(*b).shape())?;
                let ad = self.value(*a).data();
                let bd = self.value(*b).data();
                let (ga, gb) = match map {
                    None => (
                        gout.iter().zip(bd).map(|(g, y)| g * y).collect::<Vec<_>>(),
                        gout.iter().zip(ad).map(|(g, x)| g * x).collect::<Vec<_>>(),
                    ),
                    Some(m) => {
                        let ga = gout.iter().zip(&m).map(|(g, &j)| g * bd[j]).collect();
                        let mut gb = vec![0.0; bd.len()];
                        for ((g, x), &j) in gout.iter().zip(ad).zip(&m) {
                            gb[j] += g * x;
                        }
                        (ga, gb)
                    }
                };
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::MatMul { a, b } => {
                let [m, k] = self.value(*a).dims2()?;
                let [_, n] = self.value(*b).dims2()?;
                let ad = self.value(*a).data();
                let bd = self.value(*b).data();
                if self.nodes[a.0].requires_grad {
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &gout[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] = grow.iter().zip(&bd[p * n..(p + 1) * n]).map(|(g, y)| g * y).sum();
                        }
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.nodes[b.0].requires_grad {
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &gout[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ad[i * k + p];
                            for (o, g) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += av * g;
                            }
                        }
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::MeanOver { input, axis } => {
                let shape = self.value(*input).shape();
                let (outer, len, inner) = split_axis(shape, *axis);
                let mut gi = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for a in 0..len {
                        for i in 0..inner {
                            gi[(o * len + a) * inner + i] = gout[o * inner + i] / len as f64;
                        }
                    }
                }
                self.accumulate(grads, *input, gi);
            }
            Op::MaxOver { input, argmax } => {
                let mut gi = vec![0.0; self.value(*input).numel()];
                for (g, &idx) in gout.iter().zip(argmax) {
                    gi[idx] += g;
                }
                self.accumulate(grads, *input, gi);
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for v in inputs {
                    let len = self.value(*v).shape()[*axis];
                    let mut gi = Vec::with_capacity(outer * len * inner);
                    for o in 0..outer {
                        let start = (o * total + offset) * inner;
                        gi.extend_from_slice(&gout[start..start + len * inner]);
                    }
                    offset += len;
                    self.accumulate(grads, *v, gi);
                }
            }
            Op::Reshape(input) => self.accumulate(grads, *input, gout.to_vec()),
            Op::Sum(input) => {
                let n = self.value(*input).numel();
                self.accumulate(grads, *input, vec![gout[0]; n]);
            }
            Op::Custom { input, grad } => {
                let gi = grad.iter().map(|g| g * gout[0]).collect();
                self.accumulate(grads, *input, gi);
            }
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
