//! Loads a part catalog and reports mesh statistics per class.
//!
//! ```text
//! cargo run --example parse_meshes -- [catalog_dir]
//! ```
//! Without an argument the built-in parts are written to a temporary
//! directory first, so the example exercises the OBJ loader either way.

use std::path::PathBuf;

use synthdet::catalog::open_catalog;
use synthdet::mesh::validate_mesh;
use synthdet::parts::write_builtin_catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let d = std::env::temp_dir().join("synthdet-parts");
            write_builtin_catalog(&d)?;
            d
        }
    };
    let catalog = open_catalog(&dir)?;
    println!("{} classes from {}", catalog.len(), dir.display());
    for class in &catalog.classes {
        let mesh = &class.mesh;
        let extent = class.convex_proxy.bounds().extent() * 1000.0;
        println!(
            "{:>3} {:<22} {:>5} tris  hull {:>3} verts  {:.1}x{:.1}x{:.1} mm  groups {:?}  {}",
            class.class_id,
            class.name,
            mesh.triangles.len(),
            class.convex_proxy.vertices.len(),
            extent.x,
            extent.y,
            extent.z,
            mesh.group_names(),
            validate_mesh(mesh).summary()
        );
    }
    Ok(())
}
