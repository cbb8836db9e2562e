//! Part catalog: the set of object classes a scene is built from.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::{self, ConvexHull, HullError, Mesh, MeshError};

/// Tolerance for the hull-vs-mesh bounding box agreement check (meters).
pub const HULL_BOUNDS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("empty catalog")]
    Empty,
    #[error("duplicate part name `{0}`")]
    DuplicateName(String),
    #[error("invalid units_scale {0}")]
    BadScale(f64),
    #[error("part `{name}`: mass must be positive and finite, got {mass}")]
    BadMass { name: String, mass: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Mesh {
        path: PathBuf,
        #[source]
        source: MeshError,
    },
    #[error("{path}: unsupported mesh format (expected .obj or .stl)")]
    UnsupportedFormat { path: PathBuf },
    #[error("{path}: invalid mesh: {summary}")]
    Invalid { path: PathBuf, summary: String },
    #[error("{path}: convex proxy: {source}")]
    Hull {
        path: PathBuf,
        #[source]
        source: HullError,
    },
    #[error("{path}: malformed manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn default_scale() -> f64 {
    0.001
}

/// On-disk catalog description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogManifest {
    #[serde(default = "default_scale")]
    pub units_scale: f64,
    pub parts: Vec<PartEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartEntry {
    pub name: String,
    pub mesh_file: String,
    pub mass_kg: f64,
    /// Fixed colors per mesh sub-group, used by the fixed-appearance variant.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub palette: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct PartClass {
    pub class_id: u16,
    pub name: String,
    /// Geometry in meters, recentered so the center of mass is the origin.
    pub mesh: Mesh,
    pub convex_proxy: ConvexHull,
    pub mass: f64,
    /// Isotropic rotational inertia (kg·m²).
    pub inertia: f64,
    pub palette: BTreeMap<String, [f64; 3]>,
}

impl PartClass {
    /// Builds a class from a mesh already in meters.
    pub fn new(
        class_id: u16,
        name: impl Into<String>,
        mut mesh: Mesh,
        mass: f64,
        palette: BTreeMap<String, [f64; 3]>,
    ) -> Result<Self, HullError> {
        let hull = mesh::convex_hull(&mesh)?;
        let (_, com) = hull.volume_centroid();
        mesh.translate(&-com);
        let convex_proxy = hull.translated(&-com);
        let e = convex_proxy.bounds().extent();
        // Box-equivalent inertia averaged over the three principal axes.
        let inertia = mass * e.norm_squared() / 18.0;
        Ok(Self {
            class_id,
            name: name.into(),
            mesh,
            convex_proxy,
            mass,
            inertia,
            palette,
        })
    }

    /// Half the largest hull extent; a cheap bounding radius about the origin.
    pub fn bounding_radius(&self) -> f64 {
        self.convex_proxy
            .vertices
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PartCatalog {
    pub classes: Vec<PartClass>,
    pub units_scale: f64,
}

impl PartCatalog {
    pub fn get(&self, class_id: u16) -> Option<&PartClass> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn by_name(&self, name: &str) -> Option<&PartClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Loads every part in `manifest`, resolving mesh paths against `root`.
/// Class ids are assigned 1.. in manifest order.
pub fn load_catalog(root: &Path, manifest: &CatalogManifest) -> Result<PartCatalog, CatalogError> {
    if manifest.parts.is_empty() {
        return Err(CatalogError::Empty);
    }
    if !(manifest.units_scale.is_finite() && manifest.units_scale > 0.0) {
        return Err(CatalogError::BadScale(manifest.units_scale));
    }
    let mut names = HashSet::new();
    for p in &manifest.parts {
        if !names.insert(p.name.as_str()) {
            return Err(CatalogError::DuplicateName(p.name.clone()));
        }
    }

    let mut classes = Vec::with_capacity(manifest.parts.len());
    for (i, entry) in manifest.parts.iter().enumerate() {
        if !(entry.mass_kg.is_finite() && entry.mass_kg > 0.0) {
            return Err(CatalogError::BadMass {
                name: entry.name.clone(),
                mass: entry.mass_kg,
            });
        }
        let path = root.join(&entry.mesh_file);
        let mut mesh = read_mesh(&path)?;
        mesh.scale(manifest.units_scale);
        let report = mesh::validate_mesh(&mesh);
        if !report.is_clean() {
            return Err(CatalogError::Invalid {
                path,
                summary: report.summary(),
            });
        }
        let class = PartClass::new((i + 1) as u16, &entry.name, mesh, entry.mass_kg, entry.palette.clone())
            .map_err(|source| CatalogError::Hull {
                path: path.clone(),
                source,
            })?;
        let (hb, mb) = (class.convex_proxy.bounds(), class.mesh.bounds());
        if !(hb.contains_box(&mb, HULL_BOUNDS_TOL) && mb.contains_box(&hb, HULL_BOUNDS_TOL)) {
            return Err(CatalogError::Invalid {
                path,
                summary: "convex proxy bounds disagree with mesh bounds".into(),
            });
        }
        classes.push(class);
    }
    Ok(PartCatalog {
        classes,
        units_scale: manifest.units_scale,
    })
}

/// Reads a manifest JSON file and loads it relative to the file's directory.
pub fn load_catalog_file(path: &Path) -> Result<PartCatalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: CatalogManifest =
        serde_json::from_str(&text).map_err(|source| CatalogError::Manifest {
            path: path.to_path_buf(),
            source,
        })?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    load_catalog(root, &manifest)
}

/// Accepts either a manifest file or a directory holding `catalog.json`.
pub fn open_catalog(path: &Path) -> Result<PartCatalog, CatalogError> {
    if path.is_dir() {
        load_catalog_file(&path.join("catalog.json"))
    } else {
        load_catalog_file(path)
    }
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CatalogError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = std::fs::read(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = match ext.as_deref() {
        Some("obj") => mesh::parse_obj(&bytes),
        Some("stl") => mesh::parse_stl(&bytes),
        _ => {
            return Err(CatalogError::UnsupportedFormat {
                path: path.to_path_buf(),
            })
        }
    };
    parsed.map_err(|source| CatalogError::Mesh {
        path: path.to_path_buf(),
        source,
    })
}

/// Box-equivalent helper used by tests and the built-in parts.
pub fn centered_extent(class: &PartClass) -> Vec3 {
    class.convex_proxy.bounds().extent()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts;

    fn write_manifest(dir: &Path, parts: &[(&str, &str)]) -> CatalogManifest {
        let cube = parts::box_mesh(Vec3::zeros(), Vec3::new(10.0, 10.0, 10.0), "body");
        std::fs::write(dir.join("cube.obj"), cube.to_obj()).unwrap();
        CatalogManifest {
            units_scale: 0.001,
            parts: parts
                .iter()
                .map(|(n, f)| PartEntry {
                    name: n.to_string(),
                    mesh_file: f.to_string(),
                    mass_kg: 0.001,
                    palette: BTreeMap::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn builtin_catalog_loads_twelve_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = parts::write_builtin_catalog(dir.path()).unwrap();
        let cat = load_catalog_file(&manifest_path).unwrap();
        assert_eq!(cat.len(), 12);
        let ids: Vec<u16> = cat.classes.iter().map(|c| c.class_id).collect();
        assert_eq!(ids, (1..=12).collect::<Vec<_>>());
        assert_eq!(cat.classes[0].name, parts::BUILTIN_NAMES[0]);
        for c in &cat.classes {
            // mm → m: every part is under 3 cm.
            assert!(c.bounding_radius() < 0.03, "{} too large", c.name);
            for v in &c.mesh.vertices {
                assert!(c.convex_proxy.contains(v, 1e-6));
            }
        }
    }

    #[test]
    fn empty_manifest() {
        let m = CatalogManifest { units_scale: 1.0, parts: vec![] };
        assert!(matches!(load_catalog(Path::new("."), &m), Err(CatalogError::Empty)));
        assert_eq!(CatalogError::Empty.to_string(), "empty catalog");
    }

    #[test]
    fn duplicate_name() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_manifest(dir.path(), &[("led", "cube.obj"), ("led", "cube.obj")]);
        let err = load_catalog(dir.path(), &m).unwrap_err();
        assert!(err.to_string().contains("led"));
        assert!(matches!(err, CatalogError::DuplicateName(_)));
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_manifest(dir.path(), &[("led", "nope.obj")]);
        assert!(matches!(load_catalog(dir.path(), &m), Err(CatalogError::Io { .. })));
    }

    #[test]
    fn parse_failure_names_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
        let m = write_manifest(dir.path(), &[("bad", "bad.obj")]);
        let err = load_catalog(dir.path(), &m).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.obj") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn stl_parts_load() {
        let dir = tempfile::tempdir().unwrap();
        let cube = parts::box_mesh(Vec3::zeros(), Vec3::new(4.0, 4.0, 2.0), "body");
        std::fs::write(dir.path().join("c.stl"), mesh::write_stl(&cube)).unwrap();
        let m = CatalogManifest {
            units_scale: 0.001,
            parts: vec![PartEntry {
                name: "c".into(),
                mesh_file: "c.stl".into(),
                mass_kg: 0.001,
                palette: BTreeMap::new(),
            }],
        };
        let cat = load_catalog(dir.path(), &m).unwrap();
        let e = centered_extent(&cat.classes[0]);
        assert!((e - Vec3::new(0.004, 0.004, 0.002)).norm() < 1e-9);
        assert_eq!(cat.classes[0].convex_proxy.vertices.len(), 8);
    }
}
