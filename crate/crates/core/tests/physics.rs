mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthdet::catalog::PartClass;
use synthdet::geom::{Aabb, Vec3};
use synthdet::mesh::ConvexHull;
use synthdet::parts::{box_mesh, builtin_catalog, icosphere};
use synthdet::physics::{
    penetration_depth, sample_initial_poses, sample_spawn_poses, settle, step, Body, PhysicsError, PoseState,
    SettleParams, WorldState,
};

use common::{sat_depth, support_min_depth};

fn cube_hull(side: f64) -> ConvexHull {
    let h = side / 2.0;
    let mesh = box_mesh(Vec3::repeat(-h), Vec3::repeat(side), "body");
    ConvexHull::from_points(&mesh.vertices).unwrap()
}

fn body(hull: ConvexHull, mass: f64, pose: PoseState) -> Body {
    let e = hull.bounds().extent();
    Body {
        class_id: 1,
        hull: Arc::new(hull),
        mass,
        inertia: mass * e.norm_squared() / 18.0,
        pose,
    }
}

fn identity() -> UnitQuaternion<f64> {
    UnitQuaternion::identity()
}

#[test]
fn free_fall_velocity_step() {
    let world = WorldState::new(vec![body(cube_hull(0.02), 0.01, PoseState::at_rest(Vec3::new(0.0, 0.0, 1.0), identity()))]);
    let params = SettleParams { dt: 0.01, ..Default::default() };
    let next = step(&world, &params).unwrap();
    let dv = next.bodies[0].pose.linear_velocity.z - world.bodies[0].pose.linear_velocity.z;
    assert!((dv + 0.0981).abs() < 1e-12, "{dv}");
    assert!((next.time - 0.01).abs() < 1e-15);
}

#[test]
fn contact_free_step_never_gains_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let mut pose = PoseState::at_rest(
            Vec3::new(0.0, 0.0, rng.gen_range(0.5..2.0)),
            synthdet::physics::uniform_rotation(&mut rng),
        );
        pose.linear_velocity = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        pose.angular_velocity = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let world = WorldState::new(vec![body(cube_hull(0.02), 0.01, pose)]);
        for params in [SettleParams::default(), SettleParams { angular_damping: 0.0, ..Default::default() }] {
            let next = step(&world, &params).unwrap();
            let (e0, e1) = (world.mechanical_energy(), next.mechanical_energy());
            assert!(e1 <= e0 + 1e-9 * e0.abs(), "{e0} -> {e1}");
        }
    }
}

#[test]
fn cube_settles_flat_on_floor() {
    let start = PoseState::at_rest(
        Vec3::new(0.0, 0.0, 0.10),
        UnitQuaternion::from_euler_angles(0.3, 0.2, 0.1),
    );
    let world = WorldState::new(vec![body(cube_hull(0.02), 0.008, start)]);
    let params = SettleParams::default();
    let result = settle(&world, &params).unwrap();
    assert!(result.converged, "steps {}", result.steps);
    let b = &result.world.bodies[0];
    let min_z = b.world_vertices().iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    assert!(min_z.abs() < 1e-3, "bottom at {min_z}");
    assert!(min_z >= -params.max_penetration);
    assert!(b.pose.linear_velocity.norm() < params.rest_lin_speed);
    assert!(b.pose.angular_velocity.norm() < params.rest_ang_speed);
}

#[test]
fn icosphere_rests_at_its_radius() {
    let r = 0.008;
    let mesh = icosphere(Vec3::zeros(), r, 2, "ball");
    let hull = ConvexHull::from_points(&mesh.vertices).unwrap();
    let world = WorldState::new(vec![body(hull, 0.005, PoseState::at_rest(Vec3::new(0.01, 0.0, 0.1), identity()))]);
    let result = settle(&world, &SettleParams::default()).unwrap();
    assert!(result.converged);
    let z = result.world.bodies[0].pose.position.z;
    assert!((z - r).abs() < 1e-3, "center at {z}");
}

#[test]
fn settled_body_stays_put() {
    let world = WorldState::new(vec![body(cube_hull(0.02), 0.008, PoseState::at_rest(Vec3::new(0.0, 0.0, 0.0101), identity()))]);
    let params = SettleParams::default();
    let rest = settle(&world, &params).unwrap();
    assert!(rest.converged);
    let mut w = rest.world;
    for _ in 0..200 {
        w = step(&w, &params).unwrap();
    }
    let next = step(&w, &params).unwrap();
    let (p0, p1) = (w.bodies[0].pose, next.bodies[0].pose);
    assert!((p1.position - p0.position).norm() < 1e-9, "moved {:e}", (p1.position - p0.position).norm());
    assert!(p1.orientation.angle_to(&p0.orientation) < 1e-9);
}

#[test]
fn overlapping_cubes_are_separated_in_one_step() {
    let a = PoseState::at_rest(Vec3::new(0.0, 0.0, 0.5), identity());
    let b = PoseState::at_rest(Vec3::new(0.015, 0.002, 0.5), UnitQuaternion::from_euler_angles(0.0, 0.0, 0.3));
    let world = WorldState::new(vec![body(cube_hull(0.02), 0.008, a), body(cube_hull(0.02), 0.008, b)]);
    let params = SettleParams::default();
    let before = sat_depth(&world.bodies[0].hull, &a, &world.bodies[1].hull, &b);
    assert!(before > 1e-3);
    let next = step(&world, &params).unwrap();
    let (ha, hb) = (&next.bodies[0].hull, &next.bodies[1].hull);
    let (pa, pb) = (next.bodies[0].pose, next.bodies[1].pose);
    assert!(penetration_depth(ha, &pa, hb, &pb) <= params.max_penetration);
    assert!(sat_depth(ha, &pa, hb, &pb) <= params.max_penetration + 1e-12);
}

#[test]
fn penetration_depth_examples() {
    let hull = cube_hull(1.0);
    let at = |x: f64| PoseState::at_rest(Vec3::new(x, 0.0, 0.0), identity());
    assert!((penetration_depth(&hull, &at(0.0), &hull, &at(0.99)) - 0.01).abs() < 1e-12);
    assert!((penetration_depth(&hull, &at(0.0), &hull, &at(2.0)) + 1.0).abs() < 1e-12);
}

#[test]
fn penetration_depth_matches_support_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..60 {
        let cloud = |n: usize, scale: f64, rng: &mut ChaCha8Rng| {
            let pts: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
                .collect();
            ConvexHull::from_points(&pts).unwrap()
        };
        let a = cloud(rng.gen_range(4..20), 0.01, &mut rng);
        let b = cloud(rng.gen_range(4..20), 0.01, &mut rng);
        let pa = PoseState::at_rest(Vec3::zeros(), synthdet::physics::uniform_rotation(&mut rng));
        let offset = Vec3::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
        let pb = PoseState::at_rest(offset, synthdet::physics::uniform_rotation(&mut rng));
        let d = penetration_depth(&a, &pa, &b, &pb);
        let va = common::posed_vertices(&a, &pa);
        let vb = common::posed_vertices(&b, &pb);
        let oracle = support_min_depth(&va, &vb, 10_000);
        assert!((d - oracle).abs() < 1e-4, "case {case}: {d} vs {oracle}");
        let swapped = penetration_depth(&b, &pb, &a, &pa);
        assert!((d - swapped).abs() < 1e-9, "case {case}: asymmetric {d} vs {swapped}");
        if d > 0.0 {
            let sat = sat_depth(&a, &pa, &b, &pb);
            assert!((d - sat).abs() < 1e-9, "case {case}: {d} vs SAT {sat}");
        }
    }
}

#[test]
fn initial_pose_sampling() {
    let catalog = builtin_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = Vec3::new(0.01, -0.02, 0.1);
    let point = Aabb::new(p, p);
    let poses = sample_initial_poses(&[1], &catalog, &mut rng, &point).unwrap();
    assert_eq!(poses[0].position, p);
    assert!((poses[0].orientation.quaternion().norm() - 1.0).abs() < 1e-9);

    let region = Aabb::new(Vec3::new(-0.1, -0.1, 0.05), Vec3::new(0.1, 0.1, 0.15));
    let ids: Vec<u16> = (1..=12).collect();
    let poses = sample_initial_poses(&ids, &catalog, &mut rng, &region).unwrap();
    assert_eq!(poses.len(), 12);
    assert!(poses.iter().all(|p| region.contains_box(&Aabb::new(p.position, p.position), 0.0)));
    assert!(poses.iter().all(|p| p.linear_velocity == Vec3::zeros() && p.angular_velocity == Vec3::zeros()));

    let many = vec![1u16; 10_000];
    let poses = sample_initial_poses(&many, &catalog, &mut rng, &region).unwrap();
    let n = poses.len() as f64;
    let mean = poses.iter().map(|p| p.position).sum::<Vec3>() / n;
    let center = region.center();
    let extent = region.extent();
    for k in 0..3 {
        let sigma = extent[k] / 12f64.sqrt() / n.sqrt();
        assert!((mean[k] - center[k]).abs() < 3.0 * sigma, "axis {k}");
    }

    assert_eq!(sample_initial_poses(&[], &catalog, &mut rng, &region), Err(PhysicsError::EmptyParts));
    let below = Aabb::new(Vec3::new(0.0, 0.0, -0.1), Vec3::new(0.1, 0.1, 0.1));
    assert_eq!(sample_initial_poses(&[1], &catalog, &mut rng, &below), Err(PhysicsError::RegionBelowFloor));
}

#[test]
fn non_finite_state_is_reported_with_index() {
    let ok = PoseState::at_rest(Vec3::new(0.0, 0.0, 1.0), identity());
    let mut bad = ok;
    bad.position.x = f64::NAN;
    bad.position.y = 0.5;
    let world = WorldState::new(vec![body(cube_hull(0.02), 0.01, ok), body(cube_hull(0.02), 0.01, bad)]);
    assert_eq!(step(&world, &SettleParams::default()).unwrap_err(), PhysicsError::NonFinite(1));
}

#[test]
fn catalog_drop_settles_without_penetration() {
    let catalog = builtin_catalog();
    let ids: Vec<u16> = (1..=12).collect();
    let params = SettleParams::default();
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poses = sample_spawn_poses(&ids, &catalog, &mut rng, &synthdet::physics::default_drop_region()).unwrap();
        let world = WorldState::from_catalog(&catalog, &ids, &poses).unwrap();
        let result = settle(&world, &params).unwrap();
        assert!(result.converged, "seed {seed} did not converge in {} steps", result.steps);
        let bodies = &result.world.bodies;
        for (i, a) in bodies.iter().enumerate() {
            let min_z = a.world_vertices().iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
            assert!(min_z >= -1e-4, "seed {seed} body {i} below floor: {min_z}");
            for b in &bodies[i + 1..] {
                let d = sat_depth(&a.hull, &a.pose, &b.hull, &b.pose);
                assert!(d <= 1e-4, "seed {seed}: penetration {d}");
            }
        }
    }
}

#[test]
fn trajectories_are_bit_identical() {
    let catalog = builtin_catalog();
    let ids: Vec<u16> = (1..=12).collect();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let poses = sample_spawn_poses(&ids, &catalog, &mut rng, &synthdet::physics::default_drop_region()).unwrap();
        let mut w = WorldState::from_catalog(&catalog, &ids, &poses).unwrap();
        let mut trace = Vec::new();
        for _ in 0..300 {
            w = step(&w, &SettleParams::default()).unwrap();
            trace.extend(w.poses());
        }
        trace
    };
    assert_eq!(run(), run());
}

#[test]
fn from_catalog_rejects_unknown_class() {
    let catalog = builtin_catalog();
    let pose = PoseState::at_rest(Vec3::new(0.0, 0.0, 0.1), identity());
    assert!(matches!(WorldState::from_catalog(&catalog, &[99], &[pose]), Err(PhysicsError::UnknownClass(99))));
    let _ = PartClass::new(1, "x", box_mesh(Vec3::zeros(), Vec3::repeat(0.01), "b"), 0.001, BTreeMap::new()).unwrap();
}
