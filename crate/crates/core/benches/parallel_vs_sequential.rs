use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikewave::difm::{next_event, Network, NetworkState};
use spikewave::params::ModelParams;
use spikewave::parallel::ExecutionMode;
use spikewave::solver::{scan_guesses, SolveOptions};
use spikewave::stability::{build_matrices, e_grid, RootGrid, RootWindow};
use spikewave::verify::oracle_battery;
use spikewave::wave::CoarseWave;

const MODES: [(&str, ExecutionMode); 2] = [("sequential", ExecutionMode::Sequential), ("parallel", ExecutionMode::Parallel)];

fn tw3() -> (CoarseWave, ModelParams) {
    let wave = CoarseWave::new(0.3054, vec![0.0, 0.6166, 1.2085]).unwrap();
    (wave, ModelParams::default().with_beta(10.0))
}

fn bench_e_grid(c: &mut Criterion) {
    let (wave, p) = tw3();
    let mats = build_matrices(&wave, &p).unwrap();
    let window = RootWindow::for_params(&p);
    let grid = RootGrid { re_count: 41, im_count: 81 };
    let mut g = c.benchmark_group("e_grid");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| e_grid(&mats, &window, &grid, mode).unwrap()));
    }
    g.finish();
}

fn bench_firing_search(c: &mut Criterion) {
    let mut p = ModelParams::default();
    p.domain.n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let state = NetworkState {
        t: 0.0,
        v: (0..4000).map(|_| rng.gen_range(0.0..0.99)).collect(),
        s: (0..4000).map(|_| rng.gen_range(0.0..0.5)).collect(),
    };
    let mut g = c.benchmark_group("firing_search");
    for (name, mode) in MODES {
        let net = Network::new(&p, mode).unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| next_event(&state, &net, 5.0)));
    }
    g.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let p = ModelParams::default().with_beta(10.0);
    let opts = SolveOptions::default();
    let mut g = c.benchmark_group("guess_sweep");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| scan_guesses(3, &p, &[0.1, 0.3, 1.0], &[0.1, 0.4, 1.0], &opts, mode))
        });
    }
    g.finish();
}

fn bench_oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle_battery");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| oracle_battery(mode).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_e_grid, bench_firing_search, bench_sweep, bench_oracles);
criterion_main!(benches);
