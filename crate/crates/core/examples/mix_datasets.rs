//! Builds mixed manifests like the refined/randomized blends used for
//! training, then splits one into train and validation parts.
//!
//! ```text
//! cargo run --example mix_datasets
//! ```

use synthdet::composer::{compose_manifests, largest_remainder, split, DatasetManifest, ManifestRecord};
use synthdet::randomizer::DatasetVariant;

fn fake(variant: DatasetVariant, n: usize) -> DatasetManifest {
    DatasetManifest {
        records: (0..n)
            .map(|i| ManifestRecord {
                image: format!("{}/frame_{i:06}.png", variant.tag()).into(),
                annotation: Some(format!("{}/frame_{i:06}.json", variant.tag()).into()),
                variant,
            })
            .collect(),
        seed: 0,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let refined = fake(DatasetVariant::FixRefined, 10_000);
    let rand_tex = fake(DatasetVariant::RandTex, 10_000);
    println!("largest remainder of [1/3, 1/3, 1/3] over 10: {:?}", largest_remainder(&[1.0 / 3.0; 3], 10));
    for (a, b) in [(0.0, 1.0), (0.2, 0.8), (0.5, 0.5), (0.8, 0.2), (1.0, 0.0)] {
        let mixed = compose_manifests(
            &[("refined".into(), &refined, a), ("rand-tex".into(), &rand_tex, b)],
            10_000,
            42,
        )?;
        let refined_n = mixed.records.iter().filter(|r| r.variant == DatasetVariant::FixRefined).count();
        println!("{:>3}/{:<3} -> {refined_n} refined + {} randomized", (a * 100.0) as u32, (b * 100.0) as u32, mixed.len() - refined_n);
    }
    let mixed = compose_manifests(&[("refined".into(), &refined, 0.2), ("rand-tex".into(), &rand_tex, 0.8)], 1000, 7)?;
    let (train, val) = split(&mixed, (0.9, 0.1), 7)?;
    println!("split 1000 into {} train and {} val", train.len(), val.len());
    print!("first records:\n{}", DatasetManifest { records: mixed.records[..3].to_vec(), seed: 7 }.to_jsonl());
    Ok(())
}
