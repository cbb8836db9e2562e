//! Generates a small dataset directory the same way the `generate`
//! subcommand does.
//!
//! ```text
//! cargo run --release --example generate_dataset -- [out_dir] [count] [seed]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use synthdet::parts::builtin_catalog;
use synthdet::pipeline::{generate_dataset, GenerationConfig};
use synthdet::randomizer::DatasetVariant;
use synthdet::renderer::RenderConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthdet-out".into()));
    let count: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(6);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let catalog = builtin_catalog();
    let start = Instant::now();
    for variant in [DatasetVariant::Fix, DatasetVariant::RandTex] {
        let config = GenerationConfig {
            variant,
            master_seed: seed,
            count,
            render: RenderConfig {
                width: 512,
                height: 384,
                ..Default::default()
            },
            ..Default::default()
        };
        let dir = out.join(variant.tag());
        let summary = generate_dataset(&config, &catalog, &dir, &|i| eprintln!("{variant} frame {i}"))?;
        println!("{variant}: {} frames, {} annotations in {}", summary.frames, summary.instances, dir.display());
    }
    println!("done in {:.2?}", start.elapsed());
    Ok(())
}
