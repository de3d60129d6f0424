//! Central finite differences against the analytic ConvBlock backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reobj_core::encoding::FeatureMap;
use reobj_core::tripletnet::{triplet_loss, triplet_loss_grad, ConvBlock, ConvBlockParams, HeadConfig};

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-3;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

fn random_map(h: usize, w: usize, c: usize, rng: &mut ChaCha8Rng) -> FeatureMap {
    FeatureMap::new(h, w, c, (0..h * w * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

fn config(c: usize) -> HeadConfig {
    HeadConfig {
        in_channels: c,
        conv1_channels: 6,
        conv2_channels: 5,
        embed_dim: 4,
    }
}

fn objective(params: &ConvBlockParams, x: &FeatureMap, g: &[f64]) -> f64 {
    let e = ConvBlock::new(params.clone()).embed(x).unwrap();
    e.0.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// Worst relative error over every parameter for `g . embed(x)`.
fn worst_param_error(c: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ConvBlockParams::init(config(c), seed).unwrap();
    let x = random_map(6, 5, c, &mut rng);
    let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let block = ConvBlock::new(params.clone());
    let (_, cache) = block.forward(&x).unwrap();
    let (grads, _) = block.backward(&cache, &g).unwrap();
    let mut worst = 0.0f64;
    let mut p = params.clone();
    for i in 0..params.num_params() {
        let v = params.get_flat(i);
        p.set_flat(i, v + EPS);
        let up = objective(&p, &x, &g);
        p.set_flat(i, v - EPS);
        let down = objective(&p, &x, &g);
        p.set_flat(i, v);
        let numeric = (up - down) / (2.0 * EPS);
        worst = worst.max(rel_err(grads.get_flat(i), numeric));
    }
    worst
}

#[test]
fn parameter_gradients_match_finite_differences() {
    for c in [8, 16] {
        for seed in 0..5 {
            let worst = worst_param_error(c, seed);
            assert!(worst <= TOL, "c_in {c} seed {seed}: worst relative error {worst:e}");
        }
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let params = ConvBlockParams::init(config(8), 3).unwrap();
    let block = ConvBlock::new(params.clone());
    let x = random_map(4, 4, 8, &mut rng);
    let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, cache) = block.forward(&x).unwrap();
    let (_, dx) = block.backward(&cache, &g).unwrap();
    let mut data: Vec<f32> = x.data().to_vec();
    for i in 0..data.len() {
        // the map stores f32, so perturb by a step f32 represents exactly
        let v = data[i];
        let step = 1.0f32 / 1024.0;
        data[i] = v + step;
        let up = objective(&params, &FeatureMap::new(4, 4, 8, data.clone()).unwrap(), &g);
        data[i] = v - step;
        let down = objective(&params, &FeatureMap::new(4, 4, 8, data.clone()).unwrap(), &g);
        data[i] = v;
        let numeric = (up - down) / (2.0 * step as f64);
        assert!(rel_err(dx[i], numeric) <= 1e-2, "input {i}: {} vs {numeric}", dx[i]);
    }
}

/// Shared weights: the triplet gradient is the sum of the three towers.
#[test]
fn triplet_gradient_through_shared_towers() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = ConvBlockParams::init(config(8), 11).unwrap();
    let maps: Vec<FeatureMap> = (0..3).map(|_| random_map(5, 5, 8, &mut rng)).collect();
    let margin = 2.5; // keeps the hinge active for unit-norm embeddings
    let loss = |p: &ConvBlockParams| {
        let b = ConvBlock::new(p.clone());
        let e: Vec<_> = maps.iter().map(|m| b.embed(m).unwrap()).collect();
        triplet_loss(e[0].as_slice(), e[1].as_slice(), e[2].as_slice(), margin).unwrap()
    };
    let block = ConvBlock::new(params.clone());
    let fw: Vec<_> = maps.iter().map(|m| block.forward(m).unwrap()).collect();
    let tg = triplet_loss_grad(fw[0].0.as_slice(), fw[1].0.as_slice(), fw[2].0.as_slice(), margin).unwrap();
    assert!(tg.loss > 0.0);
    let mut total = ConvBlockParams::zeros(config(8));
    for ((_, cache), g) in fw.iter().zip([&tg.anchor, &tg.positive, &tg.negative]) {
        total.add_scaled(&block.backward(cache, g).unwrap().0, 1.0);
    }
    let mut p = params.clone();
    for i in (0..params.num_params()).step_by(7) {
        let v = params.get_flat(i);
        p.set_flat(i, v + EPS);
        let up = loss(&p);
        p.set_flat(i, v - EPS);
        let down = loss(&p);
        p.set_flat(i, v);
        let numeric = (up - down) / (2.0 * EPS);
        assert!(rel_err(total.get_flat(i), numeric) <= TOL, "param {i}: {} vs {numeric}", total.get_flat(i));
    }
}
