use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use eocsa_bench::{planted_design, survival_instance, uniform_tensor};
use eocsa_core::autodiff::{Mode, Padding, Tape};
use eocsa_core::dcas::{cox_loss, DcasConfig, DcasModel};
use eocsa_core::survival::lasso::{lambda_grid, lambda_max, lasso_cox_path};
use eocsa_core::survival::{concordance_index, time_dependent_roc};

fn conv2d(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv2d");
    let x = uniform_tensor(&[8, 32, 32, 32], 1);
    let k = uniform_tensor(&[32, 32, 3, 3], 2);
    g.bench_function("forward 8x32x32x32 k3", |b| {
        b.iter(|| {
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let kv = t.param(k.clone());
            let y = t.conv2d(xv, kv, 1, Padding::Same).unwrap();
            black_box(t.value(y).numel())
        })
    });
    g.bench_function("forward+backward 8x32x32x32 k3", |b| {
        b.iter(|| {
            let mut t = Tape::new();
            let xv = t.param(x.clone());
            let kv = t.param(k.clone());
            let y = t.conv2d(xv, kv, 1, Padding::Same).unwrap();
            let s = t.sum(y);
            black_box(t.backward(s).unwrap())
        })
    });
    g.finish();
}

fn dcas_step(c: &mut Criterion) {
    let cfg = DcasConfig::desk();
    let model = DcasModel::new(&cfg, 3).unwrap();
    let x = uniform_tensor(&[8, 3, cfg.input_side, cfg.input_side], 4);
    let (_, recs) = survival_instance(8, 5);
    c.bench_function("dcas forward+backward batch 8", |b| {
        b.iter(|| {
            let mut m = model.clone();
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let f = m.forward(&mut t, xv, Mode::Train).unwrap();
            let loss = cox_loss(&mut t, f.risk, &recs).unwrap();
            black_box(t.backward(loss).unwrap())
        })
    });
}

fn survival_metrics(c: &mut Criterion) {
    let mut g = c.benchmark_group("survival metrics");
    for n in [100, 1_000, 10_000] {
        let (risks, recs) = survival_instance(n, 6);
        g.bench_with_input(BenchmarkId::new("c-index", n), &n, |b, _| {
            b.iter(|| black_box(concordance_index(&risks, &recs).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("roc at day 180", n), &n, |b, _| {
            b.iter(|| black_box(time_dependent_roc(&risks, &recs, 180.0).unwrap().auc))
        });
    }
    g.finish();
}

fn lasso(c: &mut Criterion) {
    let (x, recs) = planted_design(200, 20, 7);
    let lambdas = lambda_grid(lambda_max(&x, &recs).unwrap(), 50, 1e-3);
    let mut g = c.benchmark_group("lasso-cox");
    g.sample_size(10);
    g.bench_function("path 50 lambdas n200 d20", |b| {
        b.iter(|| black_box(lasso_cox_path(&x, &recs, &lambdas, 1e-7, 10_000).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, conv2d, dcas_step, survival_metrics, lasso);
criterion_main!(benches);
