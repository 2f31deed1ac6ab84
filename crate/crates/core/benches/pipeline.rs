use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use evlogdp::anonymizer::{inject_time_noise, Draft};
use evlogdp::calibration::{build_epsilon_plan, estimate_priors, Precisions};
use evlogdp::dafsa::prepare;
use evlogdp::synthetic::{generate, SyntheticConfig};
use evlogdp::{anonymize, Execution, Mode, RunParams};

const DELTA: f64 = 0.3;
const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn stages(c: &mut Criterion) {
    let log = generate(&SyntheticConfig::sepsis_scale(1)).unwrap();
    let (_, annotated) = prepare(&log).unwrap();

    let mut group = c.benchmark_group("estimate_priors");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || annotated.clone(),
                |mut a| estimate_priors(&mut a, DELTA, Precisions::default(), exec).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();

    let mut calibrated = annotated.clone();
    estimate_priors(&mut calibrated, DELTA, Precisions::default(), Execution::Sequential).unwrap();
    build_epsilon_plan(&mut calibrated, DELTA, Mode::Sample, false, Vec::new()).unwrap();
    // two copies of every case so the per-copy streams are exercised
    let draft = Draft::from_multiplicities(&calibrated, vec![2; calibrated.cases.len()]);

    let mut group = c.benchmark_group("inject_time_noise");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || draft.clone(),
                |mut d| {
                    inject_time_noise(&mut d, &calibrated, 9, exec);
                    d
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let log = generate(&SyntheticConfig::sepsis_scale(1)).unwrap();
    let mut group = c.benchmark_group("anonymize");
    group.sample_size(10);
    for (name, exec) in MODES {
        let params = RunParams {
            delta: DELTA,
            seed: 3,
            exec,
            ..RunParams::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| anonymize(&log, &params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages, end_to_end);
criterion_main!(benches);
