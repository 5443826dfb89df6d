use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use anisoeval_core::analytics::anisotropy_index;
use anisoeval_core::scheduler::{hs_halfwidth, neyman_allocation, run_evaluation};
use anisoeval_core::scoring::default_scorer;
use anisoeval_core::synth::{synthetic_cohort, synthetic_dataset, CohortKind, CohortSpec, PopulationSpec};
use anisoeval_core::{rng, Grading, Mode, Population, SchedulerConfig};

fn dims(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("s{i}")).collect()
}

fn allocation(c: &mut Criterion) {
    let mut group = c.benchmark_group("neyman_allocation");
    for h in [2usize, 8, 64] {
        let w = vec![1.0 / h as f64; h];
        let s: Vec<f64> = (0..h).map(|i| 0.1 + 0.4 * rng::unit_f64(rng::key(1, &i.to_string()))).collect();
        let costs: Vec<f64> = (0..h).map(|i| 1.0 + (i % 3) as f64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(h), &h, |b, _| {
            b.iter(|| neyman_allocation(black_box(&w), black_box(&s), &costs, 10_000, None).unwrap())
        });
    }
    group.finish();
}

fn halfwidth(c: &mut Criterion) {
    c.bench_function("hs_halfwidth", |b| b.iter(|| hs_halfwidth(black_box(731), black_box(2000), 0.00625).unwrap()));
}

fn evaluation(c: &mut Criterion) {
    let d = dims(8);
    let pop = Population::new(
        &synthetic_dataset(&PopulationSpec {
            dimensions: d.clone(),
            per_dimension: 2000,
            cost_spread: 0.5,
        }),
        None,
    )
    .unwrap();
    let profile = synthetic_cohort(
        &CohortSpec {
            kind: CohortKind::Anisotropic,
            size: 1,
            low: 0.3,
            high: 0.9,
            grading: Grading::Binary,
            seed: 5,
        },
        &d,
    )
    .remove(0);
    let scorer = default_scorer().prefer_hint(true);
    let mut group = c.benchmark_group("run_evaluation");
    group.sample_size(10);
    for (name, mode, delta) in [("dynamic_0.05", Mode::Dynamic, 0.05), ("full_set", Mode::FullSet, 0.05)] {
        let cfg = SchedulerConfig {
            mode,
            delta,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| run_evaluation("m", &pop, &cfg, &profile, &scorer).unwrap()));
    }
    group.finish();
}

fn anisotropy(c: &mut Criterion) {
    let scores: Vec<Vec<f64>> = (0..100)
        .map(|i| (0..7).map(|j| rng::unit_f64(rng::key(i, &j.to_string()))).collect())
        .collect();
    c.bench_function("anisotropy_index_100x7", |b| b.iter(|| anisotropy_index(black_box(&scores)).unwrap()));
}

criterion_group!(benches, allocation, halfwidth, evaluation, anisotropy);
criterion_main!(benches);
