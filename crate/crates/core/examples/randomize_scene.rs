//! Samples one scene per generatable variant from the same master seed and
//! prints it as JSON.
//!
//! ```text
//! cargo run --release --example randomize_scene -- [seed] [frame_index]
//! ```

use synthdet::parts::builtin_catalog;
use synthdet::randomizer::{sample_scene, DatasetVariant, SceneParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let index: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let catalog = builtin_catalog();
    for variant in [DatasetVariant::Fix, DatasetVariant::RandNoTex, DatasetVariant::RandTex] {
        let scene = sample_scene(variant, &catalog, seed, index, &SceneParams::default())?;
        println!(
            "# {variant}: {} parts, {} lights, camera at {:?}",
            scene.instances.len(),
            scene.lights.len(),
            scene.camera.position.as_slice()
        );
        println!("{}", serde_json::to_string_pretty(&scene)?);
    }
    Ok(())
}
