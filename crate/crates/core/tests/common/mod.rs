//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::path::PathBuf;

use synthdet::catalog::{load_catalog_file, PartCatalog};
use synthdet::geom::Vec3;
use synthdet::mesh::ConvexHull;
use synthdet::physics::PoseState;
use synthdet::parts::write_builtin_catalog;

pub fn posed_vertices(hull: &ConvexHull, pose: &PoseState) -> Vec<Vec3> {
    hull.vertices.iter().map(|v| pose.orientation * v + pose.position).collect()
}

fn unique_dirs(dirs: impl Iterator<Item = Vec3>) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    for d in dirs {
        let n = d.norm();
        if n < 1e-12 {
            continue;
        }
        let d = d / n;
        if !out.iter().any(|u| u.dot(&d).abs() > 1.0 - 1e-12) {
            out.push(d);
        }
    }
    out
}

fn face_normals(hull: &ConvexHull, pose: &PoseState) -> Vec<Vec3> {
    unique_dirs((0..hull.faces.len()).map(|f| pose.orientation * hull.plane(f).0))
}

fn edge_dirs(hull: &ConvexHull, pose: &PoseState) -> Vec<Vec3> {
    unique_dirs(hull.edges().into_iter().map(|(a, b)| {
        pose.orientation * (hull.vertices[b as usize] - hull.vertices[a as usize])
    }))
}

/// Separating-axis overlap depth of two posed convex polytopes: the minimum,
/// over face normals and edge-pair cross products, of the projected overlap.
/// Positive means interpenetration by that depth; negative means separated.
pub fn sat_depth(a: &ConvexHull, pa: &PoseState, b: &ConvexHull, pb: &PoseState) -> f64 {
    let va = posed_vertices(a, pa);
    let vb = posed_vertices(b, pb);
    let project = |pts: &[Vec3], d: &Vec3| {
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let x = p.dot(d);
            (lo.min(x), hi.max(x))
        })
    };
    let mut axes = face_normals(a, pa);
    axes.extend(face_normals(b, pb));
    let (ea, eb) = (edge_dirs(a, pa), edge_dirs(b, pb));
    for x in &ea {
        for y in &eb {
            axes.push(x.cross(y));
        }
    }
    let mut depth = f64::INFINITY;
    for axis in axes {
        let n = axis.norm();
        if n < 1e-9 {
            continue;
        }
        let d = axis / n;
        let (alo, ahi) = project(&va, &d);
        let (blo, bhi) = project(&vb, &d);
        let overlap = (ahi - blo).min(bhi - alo);
        depth = depth.min(overlap);
        if depth < 0.0 {
            return depth;
        }
    }
    depth
}

/// Signed depth as the minimum of the Minkowski-difference support function
/// over unit directions: a Fibonacci sweep followed by local refinement.
pub fn support_min_depth(a: &[Vec3], b: &[Vec3], directions: usize) -> f64 {
    let h = |d: &Vec3| {
        let d = d.normalize();
        let ma = a.iter().map(|p| p.dot(&d)).fold(f64::NEG_INFINITY, f64::max);
        let mb = b.iter().map(|p| p.dot(&d)).fold(f64::INFINITY, f64::min);
        ma - mb
    };
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut samples: Vec<(f64, Vec3)> = (0..directions)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / directions as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            let d = Vec3::new(r * t.cos(), r * t.sin(), z);
            (h(&d), d)
        })
        .collect();
    samples.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best = f64::INFINITY;
    for &(v0, d0) in samples.iter().take(8) {
        let (mut v, mut d) = (v0, d0);
        let mut step = 0.05;
        while step > 1e-10 {
            let mut improved = false;
            let [t1, t2] = orthonormal(&d);
            for (s1, s2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (0.7, 0.7), (-0.7, 0.7), (0.7, -0.7), (-0.7, -0.7)] {
                let cand = (d + (t1 * s1 + t2 * s2) * step).normalize();
                let hv = h(&cand);
                if hv < v {
                    v = hv;
                    d = cand;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(v);
    }
    // Support-function minimum is the penetration depth, or minus the gap.
    best
}

fn orthonormal(n: &Vec3) -> [Vec3; 2] {
    let helper = if n.x.abs() < 0.57 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    [t1, n.cross(&t1)]
}

/// Built-in catalog written to disk and loaded back through the manifest path.
pub fn disk_catalog() -> (tempfile::TempDir, PathBuf, PartCatalog) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_builtin_catalog(&dir.path().join("catalog")).unwrap();
    let catalog = load_catalog_file(&manifest).unwrap();
    (dir, manifest, catalog)
}

/// Input positions that influence output unit `unit` of a 1-D stack,
/// found by marking kernel taps backward layer by layer.
pub fn influence_extent(layers: &[synthdet::gan::ConvLayerSpec], input: usize, unit: usize) -> (usize, usize) {
    let mut lens = vec![input];
    for l in layers {
        let n = *lens.last().unwrap() + 2 * l.padding as usize;
        lens.push((n - l.kernel as usize) / l.stride as usize + 1);
    }
    let mut marked = vec![false; lens[layers.len()]];
    marked[unit] = true;
    for (i, l) in layers.iter().enumerate().rev() {
        let mut below = vec![false; lens[i]];
        for (o, _) in marked.iter().enumerate().filter(|(_, m)| **m) {
            for t in 0..l.kernel as i64 {
                let p = (o * l.stride as usize) as i64 - l.padding as i64 + t;
                if p >= 0 && (p as usize) < below.len() {
                    below[p as usize] = true;
                }
            }
        }
        marked = below;
    }
    let first = marked.iter().position(|&m| m).unwrap();
    let last = marked.iter().rposition(|&m| m).unwrap();
    (first, last)
}

/// Ground truth and predictions with hand-computed APs: class 1 scores
/// 5/6, class 2 scores 1, so mAP is 11/12.
pub fn map_fixture() -> (serde_json::Value, serde_json::Value) {
    let gt = serde_json::json!({
        "images": [{"id": 1, "file_name": "a.png", "width": 100, "height": 100},
                   {"id": 2, "file_name": "b.png", "width": 100, "height": 100}],
        "categories": [{"id": 1, "name": "one"}, {"id": 2, "name": "two"}, {"id": 3, "name": "three"}],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10]},
            {"id": 2, "image_id": 2, "category_id": 1, "bbox": [50, 50, 20, 20]},
            {"id": 3, "image_id": 1, "category_id": 2, "bbox": [30, 30, 10, 10]}
        ]
    });
    let preds = serde_json::json!([
        {"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9},
        {"image_id": 1, "category_id": 1, "bbox": [70, 70, 10, 10], "score": 0.8},
        {"image_id": 2, "category_id": 1, "bbox": [51, 50, 20, 20], "score": 0.7},
        {"image_id": 1, "category_id": 2, "bbox": [30, 30, 10, 11], "score": 0.6}
    ]);
    (gt, preds)
}
