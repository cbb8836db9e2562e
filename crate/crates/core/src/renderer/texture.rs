//! Procedural textures evaluated at object-local points. All return values
//! in `[0, 1]`.

use crate::geom::Vec3;
use crate::randomizer::{Texture, TextureKind};
use crate::seed::splitmix64;

pub fn procedural_texture(texture: &Texture, p: &Vec3) -> f64 {
    match texture.kind {
        TextureKind::Checker => checker(texture.scale, p),
        TextureKind::ValueNoise => value_noise(texture.seed, texture.scale, p),
        TextureKind::Stripes => stripes(texture.scale, p),
    }
}

/// 1 or 0 by the parity of the cell containing `p`; cells are `1/(2 scale)` wide.
pub fn checker(scale: f64, p: &Vec3) -> f64 {
    let cells: i64 = p.iter().map(|c| (2.0 * scale * c).floor() as i64).sum();
    if cells.rem_euclid(2) == 0 {
        1.0
    } else {
        0.0
    }
}

pub fn stripes(scale: f64, p: &Vec3) -> f64 {
    0.5 + 0.5 * (std::f64::consts::TAU * scale * p.x).sin()
}

fn lattice(seed: u64, x: i64, y: i64, z: i64) -> f64 {
    let mut h = splitmix64(seed ^ x as u64);
    h = splitmix64(h ^ y as u64);
    h = splitmix64(h ^ z as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Trilinear value noise over a hashed integer lattice.
pub fn value_noise(seed: u64, scale: f64, p: &Vec3) -> f64 {
    let q = p * scale;
    let base = q.map(f64::floor);
    let f = (q - base).map(smoothstep);
    let (x, y, z) = (base.x as i64, base.y as i64, base.z as i64);
    let mut acc = 0.0;
    for corner in 0..8 {
        let (dx, dy, dz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let w = [1.0 - f.x, f.x][dx] * [1.0 - f.y, f.y][dy] * [1.0 - f.z, f.z][dz];
        acc += w * lattice(seed, x + dx as i64, y + dy as i64, z + dz as i64);
    }
    acc.clamp(0.0, 1.0)
}

/// Albedo of a material at a local point: the texture blends from the
/// secondary color (0) to the base color (1).
pub fn albedo(base: [f64; 3], texture: Option<&Texture>, p: &Vec3) -> [f64; 3] {
    match texture {
        None => base,
        Some(t) => {
            let s = procedural_texture(t, p);
            std::array::from_fn(|k| t.secondary[k] + s * (base[k] - t.secondary[k]))
        }
    }
}
