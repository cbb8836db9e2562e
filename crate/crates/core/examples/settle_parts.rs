//! Drops a handful of built-in parts onto the floor and reports how they
//! come to rest.
//!
//! ```text
//! cargo run --release --example settle_parts -- [seed]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synthdet::parts::builtin_catalog;
use synthdet::physics::{default_drop_region, penetration_depth, sample_spawn_poses, settle, SettleParams, WorldState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let catalog = builtin_catalog();
    let parts: Vec<u16> = catalog.classes.iter().map(|c| c.class_id).step_by(2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poses = sample_spawn_poses(&parts, &catalog, &mut rng, &default_drop_region())?;
    let world = WorldState::from_catalog(&catalog, &parts, &poses)?;
    let params = SettleParams::default();

    let result = settle(&world, &params)?;
    println!(
        "{} parts, converged {} after {} steps ({:.2} s simulated)",
        parts.len(),
        result.converged,
        result.steps,
        result.world.time
    );
    let bodies = &result.world.bodies;
    for b in bodies {
        let lowest = b.world_vertices().iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        let p = b.pose.position * 1000.0;
        println!(
            "{:<22} at ({:6.1}, {:6.1}, {:5.1}) mm, lowest vertex {:+.3} mm",
            catalog.get(b.class_id).map_or("?", |c| c.name.as_str()),
            p.x,
            p.y,
            p.z,
            lowest * 1000.0
        );
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 0..bodies.len() {
        for j in i + 1..bodies.len() {
            let d = penetration_depth(&bodies[i].hull, &bodies[i].pose, &bodies[j].hull, &bodies[j].pose);
            worst = worst.max(d);
        }
    }
    println!("deepest pairwise overlap {:+.4} mm", worst * 1000.0);
    Ok(())
}
