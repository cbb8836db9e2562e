use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synthdet::geom::{Aabb, Vec3};
use synthdet::parts::builtin_catalog;
use synthdet::randomizer::{
    sample_camera, sample_lights, sample_material, sample_scene, DatasetVariant, RandomizerError, SceneParams,
    TextureKind,
};

fn within_3_sigma(samples: &[f64], lo: f64, hi: f64) -> bool {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sigma = (hi - lo) / 12f64.sqrt() / n.sqrt();
    (mean - 0.5 * (lo + hi)).abs() < 3.0 * sigma
}

#[test]
fn camera_samples_fill_the_prism() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cams: Vec<_> = (0..10_000).map(|_| sample_camera(&mut rng)).collect();
    let (lo, hi) = (Vec3::new(-0.1, -0.1, 0.1), Vec3::new(0.1, 0.1, 0.2));
    for c in &cams {
        for k in 0..3 {
            assert!(c.position[k] >= lo[k] && c.position[k] <= hi[k]);
        }
        assert!(c.forward.cross(&(-c.position).normalize()).norm() < 1e-6);
        assert!(c.right.z.abs() < 1e-9);
    }
    for k in 0..3 {
        let axis: Vec<f64> = cams.iter().map(|c| c.position[k]).collect();
        assert!(within_3_sigma(&axis, lo[k], hi[k]), "axis {k}");
    }
}

#[test]
fn light_counts_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let region = Aabb::new(Vec3::new(-0.25, -0.25, 0.5), Vec3::new(0.25, 0.25, 1.0));
    let mut freq = [0usize; 5];
    for _ in 0..10_000 {
        let lights = sample_lights(&mut rng, [1, 4], &region, [0.5, 2.0]);
        freq[lights.len()] += 1;
        for l in &lights {
            assert!(l.color.iter().all(|c| (0.0..=1.0).contains(c)));
            assert!((0.5..=2.0).contains(&l.intensity));
            assert!(region.contains_box(&Aabb::new(l.position, l.position), 0.0));
        }
    }
    assert_eq!(freq[0], 0);
    for f in &freq[1..] {
        assert!((*f as f64 / 10_000.0 - 0.25).abs() < 0.02, "{freq:?}");
    }
    assert_eq!(sample_lights(&mut rng, [1, 1], &region, [1.0, 1.0]).len(), 1);
}

#[test]
fn material_variants() {
    let catalog = builtin_catalog();
    let class = catalog.get(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut kinds: HashMap<TextureKind, usize> = HashMap::new();
    for _ in 0..1000 {
        let plain = sample_material(DatasetVariant::RandNoTex, &mut rng, class, "body").unwrap();
        assert!(plain.texture.is_none());
        let tex = sample_material(DatasetVariant::RandTex, &mut rng, class, "body").unwrap();
        let t = tex.texture.expect("textured variant");
        *kinds.entry(t.kind).or_default() += 1;
        assert!(tex.base_color.iter().all(|c| (0.0..=1.0).contains(c)));
    }
    assert_eq!(kinds.len(), 3, "{kinds:?}");
}

#[test]
fn scenes_are_deterministic_and_disciplined() {
    let catalog = builtin_catalog();
    let params = SceneParams::default();
    for variant in [DatasetVariant::Fix, DatasetVariant::RandNoTex, DatasetVariant::RandTex] {
        for index in 0..3 {
            let a = sample_scene(variant, &catalog, 7, index, &params).unwrap();
            let b = sample_scene(variant, &catalog, 7, index, &params).unwrap();
            assert_eq!(a, b);
            assert!(!a.instances.is_empty() && a.instances.len() <= 12 * params.max_per_class as usize);
            assert!(!a.lights.is_empty());
            let textured = a
                .instances
                .iter()
                .flat_map(|i| i.materials.values())
                .chain([&a.floor_material])
                .any(|m| m.texture.is_some());
            if variant != DatasetVariant::RandTex {
                assert!(!textured);
            }
            if variant == DatasetVariant::Fix {
                assert_eq!(a.floor_material.base_color, [1.0, 1.0, 1.0]);
                assert!(a.floor_material.texture.is_none());
            }
            let ids: Vec<u16> = a.instances.iter().map(|i| i.instance_id).collect();
            assert_eq!(ids, (1..=ids.len() as u16).collect::<Vec<_>>());
        }
    }
    let a = sample_scene(DatasetVariant::RandTex, &catalog, 7, 0, &params).unwrap();
    let b = sample_scene(DatasetVariant::RandTex, &catalog, 8, 0, &params).unwrap();
    assert_ne!(a, b);
    assert_eq!(
        sample_scene(DatasetVariant::FixRefined, &catalog, 7, 0, &params),
        Err(RandomizerError::NotGeneratable)
    );
}

#[test]
fn unsettled_scene_reports_frame() {
    let catalog = builtin_catalog();
    let mut params = SceneParams::default();
    params.settle.max_steps = 2;
    params.settle_retries = 1;
    assert_eq!(
        sample_scene(DatasetVariant::RandNoTex, &catalog, 1, 42, &params),
        Err(RandomizerError::Unsettled { frame_index: 42, attempts: 2 })
    );
}
