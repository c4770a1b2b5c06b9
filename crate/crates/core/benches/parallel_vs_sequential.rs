use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relprobe_core::exec::Execution;
use relprobe_core::models::ModelKind;
use relprobe_core::synth::properties::build_individual_datasets;
use relprobe_core::synth::PropertyCombo;
use relprobe_core::trainer::{grid_search, GridSpec, TrainConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid(c: &mut Criterion) {
    let combo: PropertyCombo = "antisymmetric".parse().unwrap();
    let data = build_individual_datasets(combo, 30, 1).unwrap().swap_remove(0);
    let spec = GridSpec { lambda_grid: vec![0.01, 0.001, 0.0], rank_grid: vec![5, 10] };
    let cfg = TrainConfig { max_epochs: 50, ..TrainConfig::properties(3) };
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    for kind in [ModelKind::DistMult, ModelKind::ComplEx] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(kind.name(), name), &exec, |b, &exec| {
                b.iter(|| black_box(grid_search(kind, &spec, &cfg, &data, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let combos = relprobe_core::synth::properties::valid_combos();
    let mut group = c.benchmark_group("generate_all_combos");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                relprobe_core::exec::map(&combos, exec, |&combo| {
                    black_box(build_individual_datasets(combo, 50, 7).unwrap().len())
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, grid, generation);
criterion_main!(benches);
