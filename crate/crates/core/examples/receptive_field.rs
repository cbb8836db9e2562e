//! Receptive fields of a two-grid discriminator and the pooled loss over
//! both grids.
//!
//! ```text
//! cargo run --example receptive_field -- [object_extent_px]
//! ```

use synthdet::gan::{check_coverage, dual_grid_loss, patchgan_70, receptive_field, ConvLayerSpec, DualGridValues};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let extent: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(120);
    let small = patchgan_70();
    let mut large = vec![ConvLayerSpec::new(4, 2, 1); 5];
    large.extend([ConvLayerSpec::new(4, 1, 1); 2]);

    let mut grids = Vec::new();
    for (name, layers) in [("small grid", &small), ("large grid", &large)] {
        let report = receptive_field(layers, (256, 256))?;
        let c = check_coverage(&report, extent);
        println!("{name}\n{}", report.table());
        println!("covers a {extent} px object: {} (margin {} px)\n", c.covered, c.margin);
        let (w, h) = report.grid();
        grids.push(vec![vec![0.5; w as usize]; h as usize]);
    }
    let mut values = DualGridValues {
        grid_small: grids[0].clone(),
        grid_large: grids[1].clone(),
    };
    values.grid_large[0][0] = 1.0;
    println!("pooled loss over {} units: {:.6}", grids.iter().flatten().flatten().count(), dual_grid_loss(&values)?);
    Ok(())
}
