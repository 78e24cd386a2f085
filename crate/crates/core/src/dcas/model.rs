use std::path::Path;

use image::RgbImage;
use rand::Rng;

use super::attention::{cbam, nam, Cbam, Mlp};
use super::config::DcasConfig;
use crate::autodiff::{checkpoint, BatchNormStats, Mode, Padding, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

const CONVS: [(&str, usize); 6] = [
    ("conv1_1", 4),
    ("conv1_2", 1),
    ("conv1_3", 1),
    ("conv2_1", 2),
    ("conv2_2", 1),
    ("conv3", 2),
];

/// Parameter names and shapes in their fixed storage order.
fn layout(cfg: &DcasConfig) -> Result<Vec<(String, Vec<usize>)>> {
    cfg.validate()?;
    let c = cfg.channels;
    let flat = cfg.flatten_len()?;
    let mut out = Vec::new();
    let mut push = |name: String, shape: Vec<usize>| out.push((name, shape));
    let mut cin = 3;
    let mlp = |push: &mut dyn FnMut(String, Vec<usize>), prefix: &str, f: usize, h: usize| {
        push(format!("{prefix}.w1"), vec![f, h]);
        push(format!("{prefix}.b1"), vec![1, h]);
        push(format!("{prefix}.w2"), vec![h, f]);
        push(format!("{prefix}.b2"), vec![1, f]);
    };
    for (name, _) in CONVS {
        push(format!("{name}.w"), vec![c, cin, 3, 3]);
        push(format!("{name}.b"), vec![1, c, 1, 1]);
        cin = c;
        let block = match name {
            "conv1_3" => Some(("cbam1", Some("bn1"))),
            "conv2_2" => Some(("cbam2", None)),
            "conv3" => Some(("cbam3", Some("bn3"))),
            _ => None,
        };
        if let Some((cb, bn)) = block {
            mlp(&mut push, &format!("{cb}.mlp"), c, c / cfg.cbam_reduce);
            push(format!("{cb}.sam.w"), vec![1, 2, 7, 7]);
            push(format!("{cb}.sam.b"), vec![1, 1, 1, 1]);
            if let Some(bn) = bn {
                push(format!("{bn}.gamma"), vec![c]);
                push(format!("{bn}.beta"), vec![c]);
            }
        }
    }
    mlp(&mut push, "nam", flat, flat / cfg.nam_reduce);
    push("fc.w".into(), vec![flat, cfg.feature_dim]);
    push("fc.b".into(), vec![1, cfg.feature_dim]);
    push("head.w".into(), vec![cfg.feature_dim, 1]);
    Ok(out)
}

fn fan_in(shape: &[usize]) -> usize {
    match shape.len() {
        4 => shape[1] * shape[2] * shape[3],
        _ => shape[0],
    }
}

/// The attention CNN with a scalar risk head.
#[derive(Debug, Clone, PartialEq)]
pub struct DcasModel {
    pub cfg: DcasConfig,
    /// Named parameters in layout order.
    pub params: Vec<(String, Tensor)>,
    pub bn1: BatchNormStats,
    pub bn3: BatchNormStats,
}

/// Graph handles of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `[N, 1]`.
    pub risk: Var,
    /// `[N, feature_dim]`.
    pub features: Var,
    /// One handle per entry of [`DcasModel::params`].
    pub params: Vec<Var>,
}

impl DcasModel {
    /// Uniform He initialization (`±sqrt(6 / fan_in)`) for weights, zero
    /// biases, unit BN scales.
    pub fn new(cfg: &DcasConfig, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed);
        let params = layout(cfg)?
            .into_iter()
            .map(|(name, shape)| {
                let t = if name.ends_with(".gamma") {
                    Tensor::full(&shape, 1.0)
                } else if name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".beta") {
                    Tensor::zeros(&shape)
                } else {
                    let bound = (6.0 / fan_in(&shape) as f64).sqrt();
                    Tensor::from_fn(&shape, |_| rng.gen_range(-bound..bound))
                };
                (name, t)
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            params,
            bn1: BatchNormStats::new(cfg.channels),
            bn3: BatchNormStats::new(cfg.channels),
        })
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Runs the network on an `[N, 3, S, S]` input. Train mode normalizes
    /// with batch moments and updates the running BN statistics.
    pub fn forward(&mut self, tape: &mut Tape, input: Var, mode: Mode) -> Result<Forward> {
        let shape = tape.value(input).dims4()?;
        let s = self.cfg.input_side;
        if shape[1] != 3 || shape[2] != s || shape[3] != s {
            return Err(Error::Shape(format!(
                "model expects [N, 3, {s}, {s}] input, got {shape:?}"
            )));
        }
        let vars: Vec<Var> = self.params.iter().map(|(_, t)| tape.param(t.clone())).collect();
        let names: Vec<&str> = self.params.iter().map(|(n, _)| n.as_str()).collect();
        let get = |name: &str| -> Var { vars[names.iter().position(|n| *n == name).expect("layout name")] };
        let mlp = |prefix: &str| Mlp {
            w1: get(&format!("{prefix}.w1")),
            b1: get(&format!("{prefix}.b1")),
            w2: get(&format!("{prefix}.w2")),
            b2: get(&format!("{prefix}.b2")),
        };
        let block = |name: &str| Cbam {
            mlp: mlp(&format!("{name}.mlp")),
            sam_kernel: get(&format!("{name}.sam.w")),
            sam_bias: get(&format!("{name}.sam.b")),
        };

        let mut x = input;
        for (name, stride) in CONVS {
            x = tape.conv2d(x, get(&format!("{name}.w")), stride, Padding::Same)?;
            x = tape.add(x, get(&format!("{name}.b")))?;
            x = tape.relu(x);
            match name {
                "conv1_3" => {
                    x = cbam(tape, x, &block("cbam1"))?;
                    x = tape.batchnorm(x, get("bn1.gamma"), get("bn1.beta"), &mut self.bn1, mode)?;
                    x = tape.maxpool2d(x, 2)?;
                }
                "conv2_2" => x = cbam(tape, x, &block("cbam2"))?,
                "conv3" => {
                    x = cbam(tape, x, &block("cbam3"))?;
                    x = tape.batchnorm(x, get("bn3.gamma"), get("bn3.beta"), &mut self.bn3, mode)?;
                    x = tape.maxpool2d(x, 2)?;
                }
                _ => {}
            }
        }
        let n = shape[0];
        let flat = self.cfg.flatten_len()?;
        x = tape.reshape(x, &[n, flat])?;
        x = nam(tape, x, &mlp("nam"))?;
        let f = tape.matmul(x, get("fc.w"))?;
        let features = tape.add(f, get("fc.b"))?;
        let risk = tape.matmul(features, get("head.w"))?;
        Ok(Forward {
            risk,
            features,
            params: vars,
        })
    }

    /// Eval-mode risks and features, `chunk` patches at a time. Running BN
    /// statistics are read, never written.
    pub fn predict(&self, input: &Tensor, chunk: usize) -> Result<(Vec<f64>, Matrix)> {
        let [n, c, h, w] = input.dims4()?;
        let item = c * h * w;
        let chunk = chunk.max(1);
        let mut risks = Vec::with_capacity(n);
        let mut feats = Vec::with_capacity(n * self.cfg.feature_dim);
        let mut frozen = self.clone();
        for start in (0..n).step_by(chunk) {
            let end = (start + chunk).min(n);
            let part = Tensor::new(
                vec![end - start, c, h, w],
                input.data()[start * item..end * item].to_vec(),
            )?;
            let mut tape = Tape::new();
            let x = tape.constant(part);
            let out = frozen.forward(&mut tape, x, Mode::Eval)?;
            risks.extend_from_slice(tape.value(out.risk).data());
            feats.extend_from_slice(tape.value(out.features).data());
        }
        Ok((risks, Matrix::from_vec(n, self.cfg.feature_dim, feats)?))
    }

    /// Parameters followed by running BN moments, as named tensors.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = self.params.clone();
        for (name, bn) in [("bn1", &self.bn1), ("bn3", &self.bn3)] {
            let c = bn.running_mean.len();
            out.push((format!("{name}.running_mean"), Tensor::new(vec![c], bn.running_mean.clone()).expect("c > 0")));
            out.push((format!("{name}.running_var"), Tensor::new(vec![c], bn.running_var.clone()).expect("c > 0")));
        }
        out
    }

    pub fn from_tensors(cfg: &DcasConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(cfg, 0)?;
        let expected = model.to_tensors();
        if tensors.len() != expected.len() {
            return Err(Error::Shape(format!(
                "checkpoint holds {} tensors, model needs {}",
                tensors.len(),
                expected.len()
            )));
        }
        for ((name, t), (ename, et)) in tensors.iter().zip(&expected) {
            if name != ename || t.shape() != et.shape() {
                return Err(Error::Shape(format!(
                    "checkpoint tensor {name} {:?} does not match {ename} {:?}",
                    t.shape(),
                    et.shape()
                )));
            }
        }
        let np = model.params.len();
        let mut it = tensors.into_iter();
        for slot in model.params.iter_mut() {
            slot.1 = it.next().expect("length checked").1;
        }
        let rest: Vec<Tensor> = it.map(|(_, t)| t).collect();
        debug_assert_eq!(rest.len(), 4, "{np} params then 4 BN moments");
        model.bn1.running_mean = rest[0].data().to_vec();
        model.bn1.running_var = rest[1].data().to_vec();
        model.bn3.running_mean = rest[2].data().to_vec();
        model.bn3.running_var = rest[3].data().to_vec();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.to_tensors())
    }

    pub fn load(cfg: &DcasConfig, path: &Path) -> Result<Self> {
        Self::from_tensors(cfg, checkpoint::load(path)?)
    }
}

/// Stacks RGB patches into an `[N, 3, S, S]` tensor scaled to `[0, 1]`.
pub fn patches_to_tensor(patches: &[RgbImage], side: usize) -> Result<Tensor> {
    if patches.is_empty() {
        return Err(Error::Shape("no patches to stack".into()));
    }
    let plane = side * side;
    let mut data = vec![0.0; patches.len() * 3 * plane];
    for (i, p) in patches.iter().enumerate() {
        if p.width() as usize != side || p.height() as usize != side {
            return Err(Error::Shape(format!(
                "patch {i} is {}x{}, model expects {side}x{side}",
                p.width(),
                p.height()
            )));
        }
        let base = i * 3 * plane;
        for (k, px) in p.pixels().enumerate() {
            for ch in 0..3 {
                data[base + ch * plane + k] = px[ch] as f64 / 255.0;
            }
        }
    }
    Tensor::new(vec![patches.len(), 3, side, side], data)
}
