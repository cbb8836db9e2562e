use std::collections::HashSet;

use thiserror::Error;

use super::Mesh;
use crate::geom::{triangle_cross, Aabb, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("convex hull needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("input points are degenerate (collinear or coplanar)")]
    Degenerate,
    #[error("input contains non-finite coordinates")]
    NonFinite,
}

/// Closed convex polytope with outward-wound triangular faces.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

/// Hull of all vertices of `mesh`.
pub fn convex_hull(mesh: &Mesh) -> Result<ConvexHull, HullError> {
    ConvexHull::from_points(&mesh.vertices)
}

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Self {
        let n = triangle_cross(&points[v[0]], &points[v[1]], &points[v[2]]).normalize();
        Face {
            v,
            normal: n,
            offset: n.dot(&points[v[0]]),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

impl ConvexHull {
    /// Quickhull over `points`. Points within a scale-relative epsilon of a
    /// face plane are treated as inside.
    pub fn from_points(points: &[Vec3]) -> Result<Self, HullError> {
        if points.len() < 4 {
            return Err(HullError::TooFewPoints(points.len()));
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(HullError::NonFinite);
        }
        let bounds = Aabb::from_points(points.iter());
        let scale = bounds.extent().max().max(bounds.min.abs().max()).max(bounds.max.abs().max());
        if scale == 0.0 {
            return Err(HullError::Degenerate);
        }
        let eps = scale * 1e-12;
        let degenerate_tol = scale * 1e-9;

        let seed = initial_simplex(points, degenerate_tol)?;
        let centroid = seed.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;

        let mut faces: Vec<Face> = Vec::new();
        for tri in [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]] {
            let mut v = tri.map(|k| seed[k]);
            let f = Face::new(points, v);
            if f.distance(&centroid) > 0.0 {
                v.swap(1, 2);
            }
            faces.push(Face::new(points, v));
        }

        let in_seed: HashSet<usize> = seed.iter().copied().collect();
        for (i, p) in points.iter().enumerate() {
            if in_seed.contains(&i) {
                continue;
            }
            if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
                f.outside.push(i);
            }
        }

        while let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
            let apex = {
                let f = &faces[fi];
                let mut best = f.outside[0];
                let mut best_d = f.distance(&points[best]);
                for &i in &f.outside[1..] {
                    let d = f.distance(&points[i]);
                    if d > best_d {
                        best = i;
                        best_d = d;
                    }
                }
                best
            };
            let p = points[apex];

            let visible: Vec<usize> = (0..faces.len())
                .filter(|&k| faces[k].alive && faces[k].distance(&p) > eps)
                .collect();
            let mut directed: HashSet<(usize, usize)> = HashSet::new();
            for &k in &visible {
                let v = faces[k].v;
                for e in 0..3 {
                    directed.insert((v[e], v[(e + 1) % 3]));
                }
            }
            // Horizon edges keep the winding of the visible face they came from.
            let mut horizon = Vec::new();
            for &k in &visible {
                let v = faces[k].v;
                for e in 0..3 {
                    let (a, b) = (v[e], v[(e + 1) % 3]);
                    if !directed.contains(&(b, a)) {
                        horizon.push((a, b));
                    }
                }
            }

            let mut orphans = Vec::new();
            for &k in &visible {
                faces[k].alive = false;
                orphans.append(&mut faces[k].outside);
            }
            let first_new = faces.len();
            for (a, b) in horizon {
                faces.push(Face::new(points, [a, b, apex]));
            }
            for i in orphans {
                if i == apex {
                    continue;
                }
                let q = &points[i];
                if let Some(f) = faces[first_new..].iter_mut().find(|f| f.distance(q) > eps) {
                    f.outside.push(i);
                }
            }
        }

        let mut remap = vec![u32::MAX; points.len()];
        let mut vertices = Vec::new();
        let mut out_faces = Vec::new();
        for f in faces.iter().filter(|f| f.alive) {
            let tri = f.v.map(|i| {
                if remap[i] == u32::MAX {
                    remap[i] = vertices.len() as u32;
                    vertices.push(points[i]);
                }
                remap[i]
            });
            out_faces.push(tri);
        }
        Ok(ConvexHull {
            vertices,
            faces: out_faces,
        })
    }

    /// Outward unit normal and plane offset of face `f`.
    pub fn plane(&self, f: usize) -> (Vec3, f64) {
        let [a, b, c] = self.faces[f].map(|i| self.vertices[i as usize]);
        let n = triangle_cross(&a, &b, &c).normalize();
        (n, n.dot(&a))
    }

    /// Largest signed plane distance of `p`; nonpositive inside.
    pub fn signed_distance_bound(&self, p: &Vec3) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let (n, d) = self.plane(f);
                n.dot(p) - d
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        self.signed_distance_bound(p) <= tol
    }

    /// Vertex maximizing `dir · v`; ties go to the lower index.
    pub fn support(&self, dir: &Vec3) -> Vec3 {
        self.vertices[self.support_index(dir)]
    }

    pub fn support_index(&self, dir: &Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.dot(dir);
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Undirected edges, each listed once with the smaller index first.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut set = std::collections::BTreeSet::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    /// Volume and centroid of the solid, by fan tetrahedra from the first vertex.
    pub fn volume_centroid(&self) -> (f64, Vec3) {
        let o = self.vertices[0];
        let mut volume = 0.0;
        let mut moment = Vec3::zeros();
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i as usize]);
            let v = (a - o).dot(&(b - o).cross(&(c - o))) / 6.0;
            volume += v;
            moment += v * (o + a + b + c) / 4.0;
        }
        (volume, moment / volume)
    }

    pub fn translated(&self, d: &Vec3) -> ConvexHull {
        ConvexHull {
            vertices: self.vertices.iter().map(|v| v + d).collect(),
            faces: self.faces.clone(),
        }
    }
}

fn initial_simplex(points: &[Vec3], tol: f64) -> Result<[usize; 4], HullError> {
    // Widest pair among the per-axis extremes.
    let mut best = (0, 0, -1.0);
    for k in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[k] < points[lo][k] {
                lo = i;
            }
            if p[k] > points[hi][k] {
                hi = i;
            }
        }
        let d = (points[hi] - points[lo]).norm();
        if d > best.2 {
            best = (lo, hi, d);
        }
    }
    let (i0, i1, span) = best;
    if span <= tol {
        return Err(HullError::Degenerate);
    }
    let axis = (points[i1] - points[i0]) / span;

    let (mut i2, mut far) = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let w = p - points[i0];
        let d = (w - axis * w.dot(&axis)).norm();
        if d > far {
            i2 = i;
            far = d;
        }
    }
    if far <= tol {
        return Err(HullError::Degenerate);
    }

    let n = triangle_cross(&points[i0], &points[i1], &points[i2]).normalize();
    let (mut i3, mut far) = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = n.dot(&(p - points[i0])).abs();
        if d > far {
            i3 = i;
            far = d;
        }
    }
    if far <= tol {
        return Err(HullError::Degenerate);
    }
    Ok([i0, i1, i2, i3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SplitMix64;
    use proptest::prelude::*;

    fn cube_points() -> Vec<Vec3> {
        (0..8)
            .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect()
    }

    /// Every input point is behind every face, and every hull vertex is behind every face.
    fn assert_sound(hull: &ConvexHull, inputs: &[Vec3], tol: f64) {
        for f in 0..hull.faces.len() {
            let (n, d) = hull.plane(f);
            for p in inputs.iter().chain(hull.vertices.iter()) {
                assert!(n.dot(p) - d <= tol, "point {p:?} in front of face {f} by {}", n.dot(p) - d);
            }
        }
    }

    fn assert_closed(hull: &ConvexHull) {
        let mut directed = HashSet::new();
        for f in &hull.faces {
            for e in 0..3 {
                assert!(directed.insert((f[e], f[(e + 1) % 3])));
            }
        }
        for &(a, b) in &directed {
            assert!(directed.contains(&(b, a)), "open edge {a}-{b}");
        }
        // Euler characteristic of a sphere.
        let e = directed.len() / 2;
        assert_eq!(hull.vertices.len() + hull.faces.len(), e + 2);
    }

    #[test]
    fn cube_is_its_own_hull() {
        let pts = cube_points();
        let hull = ConvexHull::from_points(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 8);
        assert_eq!(hull.faces.len(), 12);
        assert_sound(&hull, &pts, 1e-12);
        assert_closed(&hull);
        let (vol, c) = hull.volume_centroid();
        assert!((vol - 1.0).abs() < 1e-12);
        assert!((c - Vec3::repeat(0.5)).norm() < 1e-12);
    }

    #[test]
    fn interior_point_dropped() {
        let mut pts = cube_points();
        pts.push(Vec3::new(0.5, 0.4, 0.3));
        // Face centers are coplanar with the hull and must be dropped too.
        pts.push(Vec3::new(0.5, 0.5, 1.0));
        let hull = ConvexHull::from_points(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 8);
        assert!(!hull.vertices.contains(&Vec3::new(0.5, 0.4, 0.3)));
    }

    #[test]
    fn coplanar_input_rejected() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        assert_eq!(ConvexHull::from_points(&pts).unwrap_err(), HullError::Degenerate);
        assert_eq!(
            ConvexHull::from_points(&pts[..3]).unwrap_err(),
            HullError::TooFewPoints(3)
        );
    }

    #[test]
    fn random_ball_points() {
        let mut rng = SplitMix64::new(99);
        let mut pts = Vec::new();
        while pts.len() < 100 {
            let p = Vec3::new(rng.next_f64(), rng.next_f64(), rng.next_f64()) * 2.0 - Vec3::repeat(1.0);
            if p.norm() <= 1.0 {
                pts.push(p);
            }
        }
        let hull = ConvexHull::from_points(&pts).unwrap();
        assert_sound(&hull, &pts, 1e-9);
        assert_closed(&hull);
    }

    proptest! {
        #[test]
        fn hull_soundness(pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 4..60)) {
            let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
            if let Ok(hull) = ConvexHull::from_points(&pts) {
                assert_sound(&hull, &pts, 1e-9);
                assert_closed(&hull);
            }
        }

        #[test]
        fn grid_points_hull(nx in 2usize..5, ny in 2usize..5, nz in 2usize..5) {
            // Lattices are the coplanar worst case.
            let mut pts = Vec::new();
            for i in 0..nx { for j in 0..ny { for k in 0..nz {
                pts.push(Vec3::new(i as f64, j as f64 * 0.5, k as f64 * 0.25));
            }}}
            let hull = ConvexHull::from_points(&pts).unwrap();
            assert_sound(&hull, &pts, 1e-9);
            assert_closed(&hull);
            prop_assert_eq!(hull.vertices.len(), 8);
        }
    }
}
