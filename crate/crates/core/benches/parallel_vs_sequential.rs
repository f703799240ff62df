use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spectra_core::model::attach_spikes_by_sigma;
use spectra_core::outliers::Analysis;
use spectra_core::shrinkage::{shrink_spectrum, Loss, ShrinkOptions, Shrinker};
use spectra_core::sim::{run_with, SimulationConfig};
use spectra_core::stieltjes::density_grid;
use spectra_core::{Execution, PopulationModel, Thresholds};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn two_bulk(m: usize, n: usize) -> PopulationModel {
    let mut pop = vec![18.0; m / 2];
    pop.extend(vec![1.0; m - m / 2]);
    let spikes = attach_spikes_by_sigma(&pop, &[35.0, 4.0]).unwrap();
    PopulationModel::new(pop, spikes, n).unwrap()
}

fn monte_carlo(c: &mut Criterion) {
    let model = two_bulk(100, 200);
    let analysis = Analysis::new(&model, Thresholds::default()).unwrap();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for mode in MODES {
        let mut cfg = SimulationConfig::new(model.clone());
        cfg.replicates = 16;
        cfg.exec = mode;
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &cfg, |b, cfg| {
            b.iter(|| run_with(black_box(cfg), &analysis).unwrap())
        });
    }
    group.finish();
}

fn density(c: &mut Criterion) {
    let model = two_bulk(400, 800);
    let f = model.f_function();
    let s = f.bulk_structure().unwrap();
    let grid: Vec<f64> = (0..4096).map(|k| 45.0 * k as f64 / 4095.0).collect();
    let mut group = c.benchmark_group("density_grid");
    for mode in MODES {
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| density_grid(&f, &s, black_box(&grid), mode).unwrap())
        });
    }
    group.finish();
}

fn shrink(c: &mut Criterion) {
    let model = two_bulk(400, 800);
    let analysis = Analysis::new(&model, Thresholds::default()).unwrap();
    let mut cfg = SimulationConfig::new(model.clone());
    cfg.coupled = false;
    let mu = run_with(&cfg, &analysis).unwrap().replicates[0].mu.clone();
    let mut group = c.benchmark_group("shrink");
    for loss in [Loss::FrobeniusOracle, Loss::Shrinker(Shrinker::Stein)] {
        for mode in MODES {
            let opts = ShrinkOptions {
                exec: mode,
                ..ShrinkOptions::default()
            };
            group.bench_function(format!("{loss}/{mode:?}"), |b| {
                b.iter(|| shrink_spectrum(black_box(&mu), &model, &analysis.f, &analysis.structure, loss, &opts).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, density, shrink);
criterion_main!(benches);
