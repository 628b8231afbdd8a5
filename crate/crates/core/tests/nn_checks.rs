use iab_core::agents::{QNetwork, Variant};
use iab_core::nn::{AdamState, Mlp, MlpSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Loss `sum(w * f(x))` so the output gradient is simply `w`.
fn weighted_sum(mlp: &Mlp, x: &[f64], batch: usize, w: &[f64]) -> f64 {
    mlp.forward_batch(x, batch)
        .unwrap()
        .iter()
        .zip(w)
        .map(|(o, w)| o * w)
        .sum()
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let spec = MlpSpec {
        input_dim: 6,
        hidden: vec![9, 7],
        output_dim: 4,
        layer_norm: true,
    };
    let mut mlp = Mlp::new(spec, &mut rng).unwrap();
    // Move the norm parameters off their identity initialisation.
    for p in mlp.params_mut().iter_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    let batch = 3;
    let x = uniform(&mut rng, 6 * batch);
    let w = uniform(&mut rng, 4 * batch);
    let cache = mlp.forward_train(&x, batch).unwrap();
    let grads = mlp.backward(&cache, &w).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = rng.gen_range(0..mlp.num_params());
        let base = mlp.params()[i];
        mlp.params_mut()[i] = base + h;
        let up = weighted_sum(&mlp, &x, batch, &w);
        mlp.params_mut()[i] = base - h;
        let down = weighted_sum(&mlp, &x, batch, &w);
        mlp.params_mut()[i] = base;
        worst = worst.max(rel_err(grads[i], (up - down) / (2.0 * h)));
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn dueling_loss_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = QNetwork::new(Variant::Dueling, 5, 4, &[8, 6], true, &mut rng).unwrap();
    let batch = 4;
    let x = uniform(&mut rng, 5 * batch);
    let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..4)).collect();
    let targets = uniform(&mut rng, batch);
    let (_, grads) = net.loss_and_grad(&x, &actions, &targets).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = rng.gen_range(0..grads.len());
        let base = net.mlp().params()[i];
        net.mlp_mut().params_mut()[i] = base + h;
        let up = net.loss_and_grad(&x, &actions, &targets).unwrap().0;
        net.mlp_mut().params_mut()[i] = base - h;
        let down = net.loss_and_grad(&x, &actions, &targets).unwrap().0;
        net.mlp_mut().params_mut()[i] = base;
        worst = worst.max(rel_err(grads[i], (up - down) / (2.0 * h)));
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn full_size_network_fits_small_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = MlpSpec {
        input_dim: 8,
        hidden: vec![1024, 512, 256],
        output_dim: 1,
        layer_norm: true,
    };
    let mut mlp = Mlp::new(spec, &mut rng).unwrap();
    let mut adam = AdamState::new(mlp.num_params(), 1e-3);
    let n = 32;
    let x = uniform(&mut rng, 8 * n);
    let y = uniform(&mut rng, n);
    let mut mse = f64::INFINITY;
    for _ in 0..2000 {
        let cache = mlp.forward_train(&x, n).unwrap();
        let out = cache.output();
        mse = out
            .iter()
            .zip(&y)
            .map(|(o, t)| (o - t).powi(2))
            .sum::<f64>()
            / n as f64;
        if mse < 1e-3 {
            break;
        }
        let g: Vec<f64> = out
            .iter()
            .zip(&y)
            .map(|(o, t)| 2.0 * (o - t) / n as f64)
            .collect();
        let grads = mlp.backward(&cache, &g).unwrap();
        adam.step(mlp.params_mut(), &grads).unwrap();
    }
    assert!(mse < 1e-3, "mse {mse}");
}

#[test]
fn fixed_seed_gives_identical_trajectories() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = MlpSpec {
            input_dim: 4,
            hidden: vec![16, 8],
            output_dim: 3,
            layer_norm: true,
        };
        let mut mlp = Mlp::new(spec, &mut rng).unwrap();
        let mut adam = AdamState::new(mlp.num_params(), 1e-3);
        let mut data = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = uniform(&mut data, 4 * 2);
            let g = uniform(&mut data, 3 * 2);
            let cache = mlp.forward_train(&x, 2).unwrap();
            let grads = mlp.backward(&cache, &g).unwrap();
            adam.step(mlp.params_mut(), &grads).unwrap();
        }
        mlp.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
