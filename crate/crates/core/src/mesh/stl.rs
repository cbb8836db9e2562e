use std::collections::HashMap;

use super::{Mesh, MeshError, SubGroup, DEFAULT_GROUP};
use crate::geom::Vec3;

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

/// Parses little-endian binary STL, welding vertices whose `f32` bits match exactly.
pub fn parse_stl(bytes: &[u8]) -> Result<Mesh, MeshError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(MeshError::Truncated { len: bytes.len() });
    }
    let declared = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap());
    let payload = &bytes[HEADER_LEN + 4..];
    if !payload.len().is_multiple_of(RECORD_LEN) {
        return Err(MeshError::Truncated { len: bytes.len() });
    }
    let actual = payload.len() / RECORD_LEN;
    if actual as u64 != declared as u64 {
        return Err(MeshError::CountMismatch { declared, actual });
    }

    let mut welded: HashMap<[u32; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(actual);
    for record in payload.chunks_exact(RECORD_LEN) {
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            // Skip the 12-byte facet normal; corners follow.
            let base = 12 + 12 * k;
            let bits: [u32; 3] = std::array::from_fn(|c| {
                let at = base + 4 * c;
                u32::from_le_bytes(record[at..at + 4].try_into().unwrap())
            });
            *slot = *welded.entry(bits).or_insert_with(|| {
                vertices.push(Vec3::new(
                    f32::from_bits(bits[0]) as f64,
                    f32::from_bits(bits[1]) as f64,
                    f32::from_bits(bits[2]) as f64,
                ));
                (vertices.len() - 1) as u32
            });
        }
        triangles.push(tri);
    }

    let count = triangles.len();
    Ok(Mesh {
        vertices,
        normals: None,
        triangles,
        sub_groups: vec![SubGroup {
            name: DEFAULT_GROUP.to_string(),
            triangles: 0..count,
        }],
        material_libs: Vec::new(),
    })
}

/// Encodes a mesh as binary STL (coordinates narrowed to `f32`).
pub fn write_stl(mesh: &Mesh) -> Vec<u8> {
    let mut out = vec![0u8; HEADER_LEN];
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        let n = mesh.face_normal(t);
        let put = |out: &mut Vec<u8>, v: &Vec3| {
            for c in v.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        };
        put(&mut out, &n);
        for v in mesh.triangle_vertices(t) {
            put(&mut out, &v);
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}
