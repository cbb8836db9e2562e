//! Procedural stand-ins for the twelve electronic parts, modelled in millimeters.
//!
//! Real CAD exports can be dropped in through a catalog manifest instead; these
//! exist so the pipeline runs out of the box.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};

use crate::catalog::{CatalogManifest, PartCatalog, PartClass, PartEntry};
use crate::geom::Vec3;
use crate::mesh::{Mesh, SubGroup};

pub const BUILTIN_NAMES: [&str; 12] = [
    "tactile_switch",
    "pin_header",
    "screw_terminal_3way",
    "dc_power_jack",
    "dip_switch",
    "slide_switch",
    "led",
    "ic_socket",
    "trimmer",
    "buzzer",
    "usb_a_socket",
    "usb_c_socket",
];

const SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Appends closed components, one sub-group per component.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    mesh: Mesh,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(mut self, part: Mesh) -> Self {
        let base = self.mesh.vertices.len() as u32;
        let start = self.mesh.triangles.len();
        self.mesh.vertices.extend(part.vertices);
        self.mesh
            .triangles
            .extend(part.triangles.iter().map(|t| t.map(|i| i + base)));
        for g in part.sub_groups {
            self.mesh.sub_groups.push(SubGroup {
                name: g.name,
                triangles: g.triangles.start + start..g.triangles.end + start,
            });
        }
        self
    }

    pub fn build(self) -> Mesh {
        self.mesh
    }
}

fn single_group(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, group: &str) -> Mesh {
    let n = triangles.len();
    Mesh {
        vertices,
        normals: None,
        triangles,
        sub_groups: vec![SubGroup {
            name: group.to_string(),
            triangles: 0..n,
        }],
        material_libs: Vec::new(),
    }
}

/// Axis-aligned box spanning `min .. min + size`, outward wound.
pub fn box_mesh(min: Vec3, size: Vec3, group: &str) -> Mesh {
    let vertices = (0..8)
        .map(|i| {
            min + Vec3::new(
                size.x * (i & 1) as f64,
                size.y * ((i >> 1) & 1) as f64,
                size.z * ((i >> 2) & 1) as f64,
            )
        })
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    single_group(vertices, triangles, group)
}

/// Box given by its base center (bottom face center) and size.
pub fn box_on(base_center: Vec3, size: Vec3, group: &str) -> Mesh {
    box_mesh(base_center - Vec3::new(size.x / 2.0, size.y / 2.0, 0.0), size, group)
}

fn orient(axis: Axis, u: f64, v: f64, w: f64) -> Vec3 {
    // Cyclic permutations keep the winding outward.
    match axis {
        Axis::Z => Vec3::new(u, v, w),
        Axis::X => Vec3::new(w, u, v),
        Axis::Y => Vec3::new(v, w, u),
    }
}

/// Closed cylinder whose base cap is centered at `base` and extends `height` along `axis`.
pub fn cylinder(base: Vec3, axis: Axis, radius: f64, height: f64, group: &str) -> Mesh {
    let mut vertices = Vec::with_capacity(2 * SEGMENTS + 2);
    for level in [0.0, height] {
        for i in 0..SEGMENTS {
            let a = TAU * i as f64 / SEGMENTS as f64;
            vertices.push(base + orient(axis, radius * a.cos(), radius * a.sin(), level));
        }
    }
    let bottom_center = vertices.len() as u32;
    vertices.push(base);
    let top_center = vertices.len() as u32;
    vertices.push(base + orient(axis, 0.0, 0.0, height));

    let s = SEGMENTS as u32;
    let mut triangles = Vec::new();
    for i in 0..s {
        let j = (i + 1) % s;
        let (b0, b1, t0, t1) = (i, j, i + s, j + s);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
        triangles.push([top_center, t0, t1]);
        triangles.push([bottom_center, b1, b0]);
    }
    single_group(vertices, triangles, group)
}

/// Hemisphere on +z with its flat face centered at `base`.
pub fn dome(base: Vec3, radius: f64, rings: usize, group: &str) -> Mesh {
    let s = SEGMENTS as u32;
    let mut vertices = Vec::new();
    for k in 0..rings {
        let phi = FRAC_PI_2 * k as f64 / rings as f64;
        for i in 0..SEGMENTS {
            let a = TAU * i as f64 / SEGMENTS as f64;
            vertices.push(
                base + Vec3::new(
                    radius * phi.cos() * a.cos(),
                    radius * phi.cos() * a.sin(),
                    radius * phi.sin(),
                ),
            );
        }
    }
    let apex = vertices.len() as u32;
    vertices.push(base + Vec3::new(0.0, 0.0, radius));
    let center = vertices.len() as u32;
    vertices.push(base);

    let mut triangles = Vec::new();
    for k in 0..rings as u32 {
        for i in 0..s {
            let j = (i + 1) % s;
            let (p0, p1) = (k * s + i, k * s + j);
            if k + 1 < rings as u32 {
                let (q0, q1) = (p0 + s, p1 + s);
                triangles.push([p0, p1, q1]);
                triangles.push([p0, q1, q0]);
            } else {
                triangles.push([p0, p1, apex]);
            }
        }
    }
    for i in 0..s {
        triangles.push([center, (i + 1) % s, i]);
    }
    single_group(vertices, triangles, group)
}

pub struct BuiltinPart {
    pub name: &'static str,
    /// Millimeters, resting on z = 0.
    pub mesh: Mesh,
    pub mass_kg: f64,
    pub palette: BTreeMap<String, [f64; 3]>,
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

fn palette(entries: &[(&str, [f64; 3])]) -> BTreeMap<String, [f64; 3]> {
    entries.iter().map(|(k, c)| (k.to_string(), *c)).collect()
}

const BLACK: [f64; 3] = [0.08, 0.08, 0.09];
const SILVER: [f64; 3] = [0.75, 0.76, 0.78];
const GOLD: [f64; 3] = [0.83, 0.69, 0.22];
const WHITE: [f64; 3] = [0.92, 0.92, 0.90];

pub fn builtin_parts() -> Vec<BuiltinPart> {
    let mut parts = Vec::with_capacity(12);

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[0],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(6.0, 6.0, 3.5), "body"))
            .add(cylinder(v(0.0, 0.0, 3.5), Axis::Z, 1.75, 1.5, "button"))
            .build(),
        mass_kg: 0.0004,
        palette: palette(&[("body", BLACK), ("button", [0.55, 0.55, 0.58])]),
    });

    let mut header = MeshBuilder::new().add(box_on(v(0.0, 0.0, 0.0), v(20.3, 2.5, 2.5), "base"));
    for i in 0..8 {
        let x = -8.89 + 2.54 * i as f64;
        header = header.add(box_on(v(x, 0.0, 2.5), v(0.64, 0.64, 6.0), "pins"));
    }
    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[1],
        mesh: header.build(),
        mass_kg: 0.0008,
        palette: palette(&[("base", BLACK), ("pins", GOLD)]),
    });

    let mut terminal = MeshBuilder::new().add(box_on(v(0.0, 0.0, 0.0), v(15.0, 8.0, 10.0), "body"));
    for i in 0..3 {
        terminal = terminal.add(cylinder(v(-5.0 + 5.0 * i as f64, 0.0, 10.0), Axis::Z, 1.6, 0.6, "screws"));
    }
    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[2],
        mesh: terminal.build(),
        mass_kg: 0.003,
        palette: palette(&[("body", [0.10, 0.45, 0.20]), ("screws", SILVER)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[3],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(14.0, 9.0, 11.0), "body"))
            .add(cylinder(v(7.0, 0.0, 5.5), Axis::X, 3.2, 1.5, "barrel"))
            .build(),
        mass_kg: 0.003,
        palette: palette(&[("body", BLACK), ("barrel", SILVER)]),
    });

    let mut dip = MeshBuilder::new().add(box_on(v(0.0, 0.0, 0.0), v(10.0, 6.5, 4.0), "body"));
    for i in 0..4 {
        dip = dip.add(box_on(v(-3.81 + 2.54 * i as f64, 0.0, 4.0), v(1.0, 1.5, 1.0), "levers"));
    }
    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[4],
        mesh: dip.build(),
        mass_kg: 0.0008,
        palette: palette(&[("body", [0.75, 0.10, 0.10]), ("levers", WHITE)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[5],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(8.6, 3.5, 3.5), "body"))
            .add(box_on(v(0.0, 0.0, 3.5), v(1.5, 1.5, 3.0), "lever"))
            .build(),
        mass_kg: 0.0005,
        palette: palette(&[("body", SILVER), ("lever", BLACK)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[6],
        mesh: MeshBuilder::new()
            .add(cylinder(v(0.0, 0.0, 0.0), Axis::Z, 2.9, 1.0, "flange"))
            .add(cylinder(v(0.0, 0.0, 1.0), Axis::Z, 2.5, 5.0, "lens"))
            .add(dome(v(0.0, 0.0, 6.0), 2.5, 4, "lens"))
            .build(),
        mass_kg: 0.0003,
        palette: palette(&[("flange", [0.85, 0.12, 0.10]), ("lens", [0.95, 0.20, 0.15])]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[7],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(10.0, 7.6, 1.5), "base"))
            .add(box_on(v(0.0, -3.0, 1.5), v(10.0, 1.6, 2.5), "rails"))
            .add(box_on(v(0.0, 3.0, 1.5), v(10.0, 1.6, 2.5), "rails"))
            .build(),
        mass_kg: 0.0008,
        palette: palette(&[("base", BLACK), ("rails", BLACK)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[8],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(6.5, 6.5, 4.5), "body"))
            .add(cylinder(v(0.0, 0.0, 4.5), Axis::Z, 2.5, 1.0, "knob"))
            .build(),
        mass_kg: 0.0004,
        palette: palette(&[("body", [0.12, 0.25, 0.70]), ("knob", WHITE)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[9],
        mesh: MeshBuilder::new()
            .add(cylinder(v(0.0, 0.0, 0.0), Axis::Z, 6.0, 7.5, "body"))
            .build(),
        mass_kg: 0.002,
        palette: palette(&[("body", BLACK)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[10],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(14.0, 13.1, 5.7), "shell"))
            .add(box_on(v(0.0, 7.55, 1.95), v(10.0, 2.0, 1.8), "tongue"))
            .build(),
        mass_kg: 0.0025,
        palette: palette(&[("shell", SILVER), ("tongue", WHITE)]),
    });

    parts.push(BuiltinPart {
        name: BUILTIN_NAMES[11],
        mesh: MeshBuilder::new()
            .add(box_on(v(0.0, 0.0, 0.0), v(8.94, 7.35, 3.26), "shell"))
            .add(box_on(v(0.0, 4.175, 1.0), v(6.6, 1.0, 1.26), "tongue"))
            .build(),
        mass_kg: 0.001,
        palette: palette(&[("shell", SILVER), ("tongue", BLACK)]),
    });

    parts
}

/// Subdivided icosahedron, outward wound.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize, group: &str) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let (ab, bc, ca) = (mid(a, b, &mut verts), mid(b, c, &mut verts), mid(c, a, &mut verts));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(|v| center + v * radius).collect();
    single_group(vertices, faces, group)
}

/// The built-in parts as an in-memory catalog in meters.
pub fn builtin_catalog() -> PartCatalog {
    let classes = builtin_parts()
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut mesh = p.mesh;
            mesh.scale(0.001);
            PartClass::new((i + 1) as u16, p.name, mesh, p.mass_kg, p.palette)
                .expect("built-in parts have valid hulls")
        })
        .collect();
    PartCatalog {
        classes,
        units_scale: 0.001,
    }
}

/// Writes the built-in parts as OBJ files plus `catalog.json` into `dir`.
/// Returns the manifest path.
pub fn write_builtin_catalog(dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for part in builtin_parts() {
        let file = format!("{}.obj", part.name);
        std::fs::write(dir.join(&file), part.mesh.to_obj())?;
        entries.push(PartEntry {
            name: part.name.to_string(),
            mesh_file: file,
            mass_kg: part.mass_kg,
            palette: part.palette,
        });
    }
    let manifest = CatalogManifest {
        units_scale: 0.001,
        parts: entries,
    };
    let path = dir.join("catalog.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(&path, json + "\n")?;
    Ok(path)
}
