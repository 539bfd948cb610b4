use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use prodnet::equilibrium::solve_equilibrium;
use prodnet::events::EventLog;
use prodnet::evolution::evolve_network;
use prodnet::market::{step_period_with, PeriodWorkspace};
use prodnet::master_eq::stationary_degree_distribution;
use prodnet::stats::{fit_power_law_tail_with, PowerLawOptions};
use prodnet_bench::{pareto_samples, params, warm_state};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn market(c: &mut Criterion) {
    let mut g = c.benchmark_group("period");
    for m in [200, 2000] {
        let base = warm_state(m, 50, 1);
        g.bench_function(format!("market_m{m}"), |b| {
            let mut ws = PeriodWorkspace::default();
            b.iter_batched_ref(
                || base.clone(),
                |s| step_period_with(s, &mut ws).unwrap(),
                BatchSize::LargeInput,
            )
        });
        g.bench_function(format!("market_and_evolution_m{m}"), |b| {
            let mut ws = PeriodWorkspace::default();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut log = EventLog::new(false);
            b.iter_batched_ref(
                || base.clone(),
                |s| {
                    step_period_with(s, &mut ws).unwrap();
                    evolve_network(s, &mut rng, &mut log)
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn oracles(c: &mut Criterion) {
    let s = warm_state(200, 0, 3);
    let p = params(200);
    c.bench_function("equilibrium_m200", |b| b.iter(|| solve_equilibrium(black_box(&s.network), &p).unwrap()));
    c.bench_function("master_equation_k500", |b| {
        b.iter(|| stationary_degree_distribution(black_box(5.0), 500).unwrap())
    });
}

fn fits(c: &mut Criterion) {
    let x = pareto_samples(2000, 1.1, 4);
    let opts = PowerLawOptions {
        bootstrap: 0,
        discrete: Some(false),
        ..Default::default()
    };
    c.bench_function("power_law_fit_n2000", |b| b.iter(|| fit_power_law_tail_with(black_box(&x), &opts).unwrap()));
}

criterion_group!(benches, market, oracles, fits);
criterion_main!(benches);
