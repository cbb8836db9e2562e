//! Triangle meshes: parsing, validation and convex proxies.

mod hull;
mod obj;
mod stl;

use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

use crate::geom::{triangle_cross, Aabb, Vec3};

pub use hull::{convex_hull, ConvexHull, HullError};
pub use obj::parse_obj;
pub use stl::{parse_stl, write_stl};

/// Triangles with area at or below this are degenerate (square meters once scaled).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

pub const DEFAULT_GROUP: &str = "default";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("input is not valid UTF-8 text")]
    NotText,
    #[error("index out of range, line {line}")]
    IndexOutOfRange { line: usize },
    #[error("non-numeric value `{token}`, line {line}")]
    NonNumeric { line: usize, token: String },
    #[error("vertex needs 3 coordinates, line {line}")]
    MissingCoordinate { line: usize },
    #[error("face with fewer than 3 vertices, line {line}")]
    ShortFace { line: usize },
    #[error("truncated STL stream ({len} bytes)")]
    Truncated { len: usize },
    #[error("STL declares {declared} triangles but payload holds {actual}")]
    CountMismatch { declared: u32, actual: usize },
}

/// A named, contiguous run of triangles sharing one material region.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGroup {
    pub name: String,
    pub triangles: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    /// Per-vertex unit normals, present only when the source supplied one for every vertex.
    pub normals: Option<Vec<Vec3>>,
    pub triangles: Vec<[u32; 3]>,
    pub sub_groups: Vec<SubGroup>,
    pub material_libs: Vec<String>,
}

impl Mesh {
    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * triangle_cross(&a, &b, &c).norm()
    }

    /// Flat face normal from the winding order.
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(t);
        triangle_cross(&a, &b, &c).normalize()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Name of the sub-group owning triangle `t`.
    pub fn group_of(&self, t: usize) -> &str {
        self.sub_groups
            .iter()
            .find(|g| g.triangles.contains(&t))
            .map(|g| g.name.as_str())
            .unwrap_or(DEFAULT_GROUP)
    }

    /// Distinct group names in first-appearance order.
    pub fn group_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        if self.sub_groups.is_empty()
            || self.sub_groups.first().map(|g| g.triangles.start) != Some(0)
        {
            names.push(DEFAULT_GROUP.to_string());
        }
        for g in &self.sub_groups {
            if !names.contains(&g.name) {
                names.push(g.name.clone());
            }
        }
        names
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.vertices {
            *v *= s;
        }
    }

    pub fn translate(&mut self, d: &Vec3) {
        for v in &mut self.vertices {
            *v += d;
        }
    }

    /// Serializes to OBJ text using the same directive subset the parser reads.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for lib in &self.material_libs {
            let _ = writeln!(out, "mtllib {lib}");
        }
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        if let Some(normals) = &self.normals {
            for n in normals {
                let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
            }
        }
        let face = |out: &mut String, t: &[u32; 3]| {
            let [a, b, c] = t.map(|i| i + 1);
            if self.normals.is_some() {
                let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
            } else {
                let _ = writeln!(out, "f {a} {b} {c}");
            }
        };
        let mut next = 0;
        for g in &self.sub_groups {
            for t in &self.triangles[next..g.triangles.start] {
                face(&mut out, t);
            }
            let _ = writeln!(out, "g {}", g.name);
            for t in &self.triangles[g.triangles.clone()] {
                face(&mut out, t);
            }
            next = g.triangles.end;
        }
        for t in &self.triangles[next..] {
            face(&mut out, t);
        }
        out
    }
}

/// Problems found by [`validate_mesh`]. Empty means the mesh is usable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub degenerate_triangles: Vec<usize>,
    pub non_finite_vertices: Vec<usize>,
    pub non_finite_normals: Vec<usize>,
    pub out_of_range_triangles: Vec<usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.degenerate_triangles.is_empty()
            && self.non_finite_vertices.is_empty()
            && self.non_finite_normals.is_empty()
            && self.out_of_range_triangles.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} degenerate triangles, {} non-finite vertices, {} non-finite normals, {} out-of-range triangles",
            self.degenerate_triangles.len(),
            self.non_finite_vertices.len(),
            self.non_finite_normals.len(),
            self.out_of_range_triangles.len()
        )
    }
}

pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut report = ValidationReport::default();
    let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
    for (i, v) in mesh.vertices.iter().enumerate() {
        if !finite(v) {
            report.non_finite_vertices.push(i);
        }
    }
    if let Some(normals) = &mesh.normals {
        for (i, n) in normals.iter().enumerate() {
            if !finite(n) {
                report.non_finite_normals.push(i);
            }
        }
    }
    let n = mesh.vertices.len();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&i| i as usize >= n) {
            report.out_of_range_triangles.push(t);
            continue;
        }
        let repeated = tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2];
        // Non-finite areas are reported through the vertices, not as degeneracies.
        let area = mesh.triangle_area(t);
        if repeated || area <= MIN_TRIANGLE_AREA {
            report.degenerate_triangles.push(t);
        }
    }
    report
}
