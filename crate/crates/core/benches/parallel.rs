use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iab_core::action_filter::FilterConfig;
use iab_core::agents::{QNetwork, Variant};
use iab_core::config::ExperimentConfig;
use iab_core::exec::{par_map, seq_map};
use iab_core::greedy::greedy_plan;
use iab_core::harness::play_episode;
use iab_core::mdp_env::IabEnv;
use iab_core::scenario::{build_scenario, DonorLayout, GridMap, LayoutPattern, Point, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instances(n: usize) -> Vec<Scenario> {
    (0..n)
        .map(|i| {
            let side = 300.0 + 50.0 * (i % 5) as f64;
            let map = GridMap::new(side, side, 50.0).unwrap();
            let donors = DonorLayout {
                pattern: LayoutPattern::Explicit,
                positions: vec![Point::new(25.0 + 50.0 * (i % 3) as f64, 25.0)],
            };
            Scenario::new(map, donors, None, Default::default(), Default::default()).unwrap()
        })
        .collect()
}

fn greedy_batch(c: &mut Criterion) {
    let scenarios = instances(32);
    let filter = FilterConfig::default();
    let mut group = c.benchmark_group("greedy_32_instances");
    group.bench_function("parallel", |b| {
        b.iter(|| {
            par_map(scenarios.len(), |i| {
                greedy_plan(&scenarios[i], &filter, 1.0).state.num_nodes()
            })
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            seq_map(scenarios.len(), |i| {
                greedy_plan(&scenarios[i], &filter, 1.0).state.num_nodes()
            })
        })
    });
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let config = ExperimentConfig::desk_preset(0);
    let scenario = Arc::new(build_scenario(&config).unwrap());
    let env = IabEnv::new(scenario, config.reward.clone(), config.filter);
    let net = QNetwork::new(
        Variant::Dueling,
        env.state_dim(),
        env.num_actions(),
        &config.training.hidden,
        true,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let episode = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        play_episode(&net, &env, 0.05, &mut rng)
            .unwrap()
            .state
            .num_nodes()
    };
    let mut group = c.benchmark_group("best_of_n_episodes");
    group.sample_size(20);
    for n in [16, 100] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| par_map(n, episode))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| seq_map(n, episode))
        });
    }
    group.finish();
}

fn forward_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = QNetwork::new(Variant::Dqn, 300, 99, &[128, 64, 32], true, &mut rng).unwrap();
    let states = vec![0.5; 300 * 64];
    c.bench_function("q_values_batch_64", |b| {
        b.iter(|| net.q_values_batch(black_box(&states), 64).unwrap())
    });
}

criterion_group!(benches, greedy_batch, evaluation, forward_batch);
criterion_main!(benches);
