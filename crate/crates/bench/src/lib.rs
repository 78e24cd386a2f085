//! Seeded inputs shared by the benchmarks.

use eocsa_core::autodiff::Tensor;
use eocsa_core::{seed, Matrix, SurvivalRecord};
use rand::Rng;

pub fn uniform_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = seed::rng(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// `n` records with tied integer times, 60% events, and uniform risks.
pub fn survival_instance(n: usize, seed: u64) -> (Vec<f64>, Vec<SurvivalRecord>) {
    let mut rng = seed::rng(seed);
    let recs = (0..n)
        .map(|i| SurvivalRecord::new(format!("P{i}"), rng.gen_range(1..=365) as f64, rng.gen_bool(0.6)))
        .collect();
    let risks = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (risks, recs)
}

/// `n × d` uniform design whose first three columns drive exponential
/// event times, with uniform censoring.
pub fn planted_design(n: usize, d: usize, seed: u64) -> (Matrix, Vec<SurvivalRecord>) {
    let mut rng = seed::rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut recs = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.7..1.7)).collect();
        let eta = x.iter().take(3).zip([1.0, -1.0, 1.0]).map(|(v, b)| v * b).sum::<f64>();
        let u: f64 = rng.gen_range(1e-12..1.0);
        let t = -u.ln() / f64::exp(eta);
        let c = rng.gen_range(0.0..3.0);
        recs.push(SurvivalRecord::new(format!("P{i}"), t.min(c), t <= c));
        rows.push(x);
    }
    (Matrix::from_rows(&rows).expect("rectangular"), recs)
}
