//! Channel, spatial and neuron attention gates built on the tape.

use crate::autodiff::{Padding, Tape, Var};
use crate::error::{Error, Result};

/// Two-layer perceptron `relu(x·w1 + b1)·w2 + b2` on `[N, F]` rows, with
/// `w1: [F, H]`, `b1: [1, H]`, `w2: [H, F]`, `b2: [1, F]`.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl Mlp {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = tape.matmul(x, self.w1)?;
        let h = tape.add(h, self.b1)?;
        let h = tape.relu(h);
        let o = tape.matmul(h, self.w2)?;
        tape.add(o, self.b2)
    }
}

/// Channel gate `σ(MLP(avgpool(x)) + MLP(maxpool(x)))`, shape `[N, C, 1, 1]`.
pub fn cam(tape: &mut Tape, x: Var, mlp: &Mlp) -> Result<Var> {
    let [n, c, _, _] = tape.value(x).dims4()?;
    if tape.value(mlp.w1).shape().first() != Some(&c) {
        return Err(Error::Shape(format!(
            "channel attention MLP expects {:?} inputs, tensor has {c} channels",
            tape.value(mlp.w1).shape().first()
        )));
    }
    let ap = tape.global_avg_pool(x)?;
    let ap = tape.reshape(ap, &[n, c])?;
    let mp = tape.global_max_pool(x)?;
    let mp = tape.reshape(mp, &[n, c])?;
    let a = mlp.apply(tape, ap)?;
    let m = mlp.apply(tape, mp)?;
    let s = tape.add(a, m)?;
    let g = tape.sigmoid(s);
    tape.reshape(g, &[n, c, 1, 1])
}

/// Spatial gate `σ(conv7×7([mean_c(x), max_c(x)]) + b)`, shape `[N, 1, H, W]`.
/// `kernel: [1, 2, 7, 7]`, `bias: [1, 1, 1, 1]`.
pub fn sam(tape: &mut Tape, x: Var, kernel: Var, bias: Var) -> Result<Var> {
    tape.value(x).dims4()?;
    let ap = tape.mean_over(x, 1)?;
    let mp = tape.max_over(x, 1)?;
    let cat = tape.concat_channels(&[ap, mp])?;
    let conv = tape.conv2d(cat, kernel, 1, Padding::Same)?;
    let z = tape.add(conv, bias)?;
    Ok(tape.sigmoid(z))
}

/// Parameters of one CBAM block.
#[derive(Debug, Clone, Copy)]
pub struct Cbam {
    pub mlp: Mlp,
    pub sam_kernel: Var,
    pub sam_bias: Var,
}

/// `x' = cam(x) ⊗ x`, `out = sam(x') ⊗ x'`.
pub fn cbam(tape: &mut Tape, x: Var, p: &Cbam) -> Result<Var> {
    let cg = cam(tape, x, &p.mlp)?;
    let xc = tape.mul(x, cg)?;
    let sg = sam(tape, xc, p.sam_kernel, p.sam_bias)?;
    tape.mul(xc, sg)
}

/// `σ(MLP(x)) ⊗ x` on `[N, F]` rows.
pub fn nam(tape: &mut Tape, x: Var, mlp: &Mlp) -> Result<Var> {
    tape.value(x).dims2()?;
    let z = mlp.apply(tape, x)?;
    let g = tape.sigmoid(z);
    tape.mul(x, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn zero_mlp(tape: &mut Tape, f: usize, h: usize) -> Mlp {
        Mlp {
            w1: tape.param(Tensor::zeros(&[f, h])),
            b1: tape.param(Tensor::zeros(&[1, h])),
            w2: tape.param(Tensor::zeros(&[h, f])),
            b2: tape.param(Tensor::zeros(&[1, f])),
        }
    }

    #[test]
    fn zero_parameters_give_half_gates() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_fn(&[2, 4, 3, 3], |i| (i as f64 * 0.37).sin()));
        let mlp = zero_mlp(&mut t, 4, 1);
        let g = cam(&mut t, x, &mlp).unwrap();
        assert!(t.value(g).data().iter().all(|&v| v == 0.5));
        let k = t.param(Tensor::zeros(&[1, 2, 7, 7]));
        let b = t.param(Tensor::zeros(&[1, 1, 1, 1]));
        let s = sam(&mut t, x, k, b).unwrap();
        assert_eq!(t.value(s).shape(), &[2, 1, 3, 3]);
        assert!(t.value(s).data().iter().all(|&v| v == 0.5));
        let flat = t.constant(Tensor::from_fn(&[3, 4], |i| i as f64 - 5.0));
        let nm = zero_mlp(&mut t, 4, 2);
        let y = nam(&mut t, flat, &nm).unwrap();
        for (o, i) in t.value(y).data().iter().zip(t.value(flat).data()) {
            assert_eq!(*o, 0.5 * i);
        }
    }

    #[test]
    fn cam_rejects_channel_mismatch() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(&[1, 4, 2, 2]));
        let mlp = zero_mlp(&mut t, 8, 2);
        assert!(cam(&mut t, x, &mlp).is_err());
    }

    #[test]
    fn saturated_gates_are_identity() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_fn(&[1, 4, 5, 5], |i| (i as f64 * 0.11).cos()));
        let mut mlp = zero_mlp(&mut t, 4, 1);
        mlp.b2 = t.param(Tensor::full(&[1, 4], 50.0));
        let cb = Cbam {
            mlp,
            sam_kernel: t.param(Tensor::zeros(&[1, 2, 7, 7])),
            sam_bias: t.param(Tensor::full(&[1, 1, 1, 1], 50.0)),
        };
        let y = cbam(&mut t, x, &cb).unwrap();
        for (o, i) in t.value(y).data().iter().zip(t.value(x).data()) {
            assert!((o - i).abs() < 1e-6);
        }
    }
}
