//! Renders a small frame, derives instance masks from its id buffer and
//! prints the resulting COCO document.
//!
//! ```text
//! cargo run --release --example annotate_frame -- [seed]
//! ```

use synthdet::annotate::{annotate_frame, decode_rle, emit_coco, filter_visibility, scaled_min_pixels, ImageInfo};
use synthdet::parts::builtin_catalog;
use synthdet::randomizer::{sample_scene, DatasetVariant, SceneParams};
use synthdet::renderer::{render, RenderConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let catalog = builtin_catalog();
    let scene = sample_scene(DatasetVariant::RandNoTex, &catalog, seed, 0, &SceneParams::default())?;
    let config = RenderConfig {
        width: 320,
        height: 240,
        samples_per_pixel: 1,
        ..Default::default()
    };
    let frame = render(&scene, &catalog, &config)?;
    let info = ImageInfo {
        id: 0,
        file_name: "frame_000000.png".into(),
        width: frame.width,
        height: frame.height,
        variant: scene.variant,
        frame_seed: scene.frame_seed,
    };
    let all = annotate_frame(&frame.ids, &scene, info)?;
    let min = scaled_min_pixels(frame.width, frame.height);
    let kept = filter_visibility(all.clone(), min);
    println!("{} parts placed, {} visible, {} above {min} px", scene.instances.len(), all.annotations.len(), kept.annotations.len());
    for a in &kept.annotations {
        let decoded = decode_rle(&a.mask.rle, a.mask.width, a.mask.height)?;
        let area = decoded.iter().filter(|&&b| b).count();
        println!("instance {:>2} class {:>2} bbox {:?} area {area}", a.mask.instance_id, a.class_id, a.bbox);
    }
    println!("{}", serde_json::to_string_pretty(&emit_coco(&[kept], &catalog)?)?);
    Ok(())
}
