use std::hint::black_box;
use std::sync::Arc;

use anncur_core::corpus::make_splits;
use anncur_core::estimators::{fit, fit_with, predict_batch};
use anncur_core::par::Execution;
use anncur_core::simulate::{gen_synthetic, run_interactive_seeds, run_loo_users, InteractiveConfig, SyntheticParams};
use anncur_core::textfeat::bow_table;
use anncur_core::{Dataset, RegressorSpec, TimedRecord};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn synthetic(n: usize) -> (Dataset, Arc<anncur_core::FeatureTable>) {
    let d = gen_synthetic(&SyntheticParams { n, seed: 1, noise_sigma: 2.0, ..Default::default() }).unwrap();
    let f = Arc::new(bow_table(&d.instances, 128, 1).unwrap());
    (d, f)
}

fn rows(d: &Dataset, f: &anncur_core::FeatureTable) -> (Vec<Vec<f64>>, Vec<f64>) {
    let times = d.instance_times();
    d.instances.iter().map(|i| (f.get(&i.id).unwrap().0.clone(), times[&i.id])).unzip()
}

fn predict(c: &mut Criterion) {
    let (d, f) = synthetic(2000);
    let (x, y) = rows(&d, &f);
    let model = fit(&RegressorSpec::gp(1.0, 1.0), &x[..300], &y[..300]).unwrap();
    let mut g = c.benchmark_group("predict_batch_gp");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| predict_batch(&model, black_box(&x), exec).unwrap()));
    }
    g.finish();
}

fn gbm(c: &mut Criterion) {
    let (d, f) = synthetic(400);
    let (x, y) = rows(&d, &f);
    let spec = RegressorSpec::gbm(20, 0.1, 3);
    let mut g = c.benchmark_group("gbm_fit");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| fit_with(&spec, black_box(&x), &y, exec).unwrap()));
    }
    g.finish();
}

fn seeds(c: &mut Criterion) {
    let (d, f) = synthetic(150);
    let split = make_splits(&d, &[0.8, 0.2], 1).unwrap();
    let cfg = InteractiveConfig { eval_every: 10, ..InteractiveConfig::new(RegressorSpec::ridge(1.0), 0) };
    let seeds: Vec<u64> = (0..8).collect();
    let mut g = c.benchmark_group("interactive_seeds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, seeds.len()), &seeds, |b, s| {
            b.iter(|| run_interactive_seeds(&d, &split, f.clone(), &cfg, s, exec).unwrap())
        });
    }
    g.finish();
}

fn loo(c: &mut Criterion) {
    let (mut d, f) = synthetic(200);
    // eight annotators with individual offsets
    let base = std::mem::take(&mut d.records);
    for u in 0..8 {
        d.records.extend(base.iter().map(|r| TimedRecord {
            annotator_id: format!("u{u}"),
            time_seconds: r.time_seconds + u as f64,
            ..r.clone()
        }));
    }
    let spec = RegressorSpec::ridge(1.0);
    let mut g = c.benchmark_group("loo_users");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| run_loo_users(&d, &spec, &f, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, predict, gbm, seeds, loo);
criterion_main!(benches);
