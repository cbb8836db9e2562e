mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthdet::gan::{dual_grid_loss, patchgan_70, receptive_field, ConvLayerSpec, DualGridValues};

use common::influence_extent;

fn random_stack(rng: &mut ChaCha8Rng) -> Vec<ConvLayerSpec> {
    (0..rng.gen_range(1..=6))
        .map(|_| ConvLayerSpec::new(rng.gen_range(1..=7), rng.gen_range(1..=3), rng.gen_range(0..=3)))
        .collect()
}

#[test]
fn analytic_rf_matches_influence_marking() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let input = 12_000;
    for _ in 0..200 {
        let layers = random_stack(&mut rng);
        let report = receptive_field(&layers, (input as u64, input as u64)).unwrap();
        let out_len = report.grid().0 as usize;
        let (first, last) = influence_extent(&layers, input, out_len / 2);
        assert!(first > 0 && last < input - 1, "unit must be interior");
        assert_eq!(report.receptive_field(), (last - first + 1) as u64, "{layers:?}");
        let strides: u64 = layers.iter().map(|l| l.stride as u64).product();
        assert_eq!(report.jump(), strides);
        let rfs: Vec<u64> = report.layers.iter().map(|l| l.receptive_field).collect();
        assert!(rfs.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn patchgan_stack_is_70() {
    let layers = patchgan_70();
    let report = receptive_field(&layers, (1024, 1024)).unwrap();
    assert_eq!(report.receptive_field(), 70);
    let (first, last) = influence_extent(&layers, 1024, report.grid().0 as usize / 2);
    assert_eq!(last - first + 1, 70);
}

#[test]
fn wider_kernels_grow_the_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut layers = random_stack(&mut rng);
        let before = receptive_field(&layers, (100_000, 100_000)).unwrap().receptive_field();
        layers.push(ConvLayerSpec::new(rng.gen_range(2..=7), rng.gen_range(1..=3), rng.gen_range(0..=3)));
        let after = receptive_field(&layers, (100_000, 100_000)).unwrap().receptive_field();
        assert!(after > before);
    }
}

fn random_grid(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (h, w) = (rng.gen_range(1..9), rng.gen_range(1..9));
    (0..h).map(|_| (0..w).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
}

#[test]
fn loss_is_the_flat_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let v = DualGridValues {
            grid_small: random_grid(&mut rng),
            grid_large: random_grid(&mut rng),
        };
        let mut flat: Vec<f64> = v.grid_small.concat();
        flat.extend(v.grid_large.concat());
        let oracle = flat.iter().sum::<f64>() / flat.len() as f64;
        let loss = dual_grid_loss(&v).unwrap();
        assert!((loss - oracle).abs() < 1e-12);

        flat.shuffle(&mut rng);
        if flat.len() >= 2 {
            let cut = rng.gen_range(1..flat.len());
            let shuffled = DualGridValues {
                grid_small: vec![flat[..cut].to_vec()],
                grid_large: vec![flat[cut..].to_vec()],
            };
            assert!((dual_grid_loss(&shuffled).unwrap() - loss).abs() < 1e-12);
        }
    }
}
