//! GJK distance and EPA penetration queries over convex point sets.
//!
//! Both shapes are given as world-space vertex lists; the convex hull of
//! each list is the shape. The Minkowski difference is `A - B`.

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::geom::Vec3;

const GJK_MAX_ITERATIONS: usize = 96;
const EPA_MAX_ITERATIONS: usize = 192;

#[derive(Debug, Clone, Copy, PartialEq)]
struct SupportPoint {
    w: Vec3,
    a: Vec3,
    b: Vec3,
}

fn support_index(points: &[Vec3], dir: &Vec3) -> usize {
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = p.dot(dir);
        if d > best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn support(a: &[Vec3], b: &[Vec3], dir: &Vec3) -> SupportPoint {
    let pa = a[support_index(a, dir)];
    let pb = b[support_index(b, &-dir)];
    SupportPoint { w: pa - pb, a: pa, b: pb }
}

/// Result of a proximity query between two convex shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    /// Positive overlap depth, or negated separation distance.
    pub depth: f64,
    /// Unit direction along which A must move to separate from (or stay clear of) B.
    pub normal: Vec3,
    /// Witness point on A.
    pub point_a: Vec3,
    /// Witness point on B.
    pub point_b: Vec3,
}

/// Closest point to the origin on the convex hull of `simplex`, with the
/// minimal supporting subset. Enumerates every face of the simplex.
fn closest_on_simplex(simplex: &[SupportPoint]) -> (Vec3, Vec<(SupportPoint, f64)>) {
    let n = simplex.len();
    let mut best: Option<(f64, usize, Vec3, Vec<(SupportPoint, f64)>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let Some(lambda) = affine_barycentric(&idx.iter().map(|&i| simplex[i].w).collect::<Vec<_>>()) else {
            continue;
        };
        if lambda.iter().any(|&l| l < 0.0) {
            continue;
        }
        let p: Vec3 = idx.iter().zip(&lambda).map(|(&i, &l)| simplex[i].w * l).sum();
        let d = p.norm_squared();
        let better = match &best {
            None => true,
            Some((bd, bk, _, _)) => d < *bd || (d == *bd && idx.len() < *bk),
        };
        if better {
            let support = idx.iter().zip(&lambda).map(|(&i, &l)| (simplex[i], l)).collect();
            best = Some((d, idx.len(), p, support));
        }
    }
    match best {
        Some((_, _, p, s)) => (p, s),
        None => (simplex[0].w, vec![(simplex[0], 1.0)]),
    }
}

/// Barycentric coordinates of the origin's projection onto the affine hull of `pts`.
fn affine_barycentric(pts: &[Vec3]) -> Option<Vec<f64>> {
    let p0 = pts[0];
    match pts.len() {
        1 => Some(vec![1.0]),
        2 => {
            let e = pts[1] - p0;
            let ee = e.norm_squared();
            if ee <= f64::MIN_POSITIVE {
                return None;
            }
            let mu = -p0.dot(&e) / ee;
            Some(vec![1.0 - mu, mu])
        }
        3 => {
            let (e1, e2) = (pts[1] - p0, pts[2] - p0);
            let g = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e2.dot(&e1), e2.dot(&e2));
            let det = g.determinant();
            if det.abs() <= 1e-30 * g[(0, 0)] * g[(1, 1)] || det == 0.0 {
                return None;
            }
            let rhs = Vector2::new(-p0.dot(&e1), -p0.dot(&e2));
            let mu = g.try_inverse()? * rhs;
            Some(vec![1.0 - mu.x - mu.y, mu.x, mu.y])
        }
        4 => {
            let m = Matrix3::from_columns(&[pts[1] - p0, pts[2] - p0, pts[3] - p0]);
            let det = m.determinant();
            let scale = (pts[1] - p0).norm() * (pts[2] - p0).norm() * (pts[3] - p0).norm();
            if det.abs() <= 1e-14 * scale || det == 0.0 {
                return None;
            }
            let mu = m.try_inverse()? * (-p0);
            Some(vec![1.0 - mu.x - mu.y - mu.z, mu.x, mu.y, mu.z])
        }
        _ => None,
    }
}

struct GjkOutput {
    distance: f64,
    closest: Vec<(SupportPoint, f64)>,
    simplex: Vec<SupportPoint>,
}

fn gjk(a: &[Vec3], b: &[Vec3], scale: f64) -> GjkOutput {
    let touch = (scale * 1e-12).powi(2);
    let first = support(a, b, &(a[0] - b[0]));
    let mut simplex = vec![first];
    let mut v = first.w;
    let mut closest = vec![(first, 1.0)];
    for _ in 0..GJK_MAX_ITERATIONS {
        let vv = v.norm_squared();
        if vv <= touch {
            return GjkOutput { distance: 0.0, closest, simplex };
        }
        let w = support(a, b, &-v);
        // Duality gap: no support point brings us meaningfully closer.
        if vv - v.dot(&w.w) <= vv * 1e-13 || simplex.iter().any(|s| s.w == w.w) {
            break;
        }
        simplex.push(w);
        let (p, support_set) = closest_on_simplex(&simplex);
        if p.norm_squared() >= vv {
            break;
        }
        simplex = support_set.iter().map(|(s, _)| *s).collect();
        closest = support_set;
        v = p;
        if simplex.len() == 4 {
            return GjkOutput { distance: 0.0, closest, simplex };
        }
    }
    let distance = v.norm();
    GjkOutput {
        distance: if distance * distance <= touch { 0.0 } else { distance },
        closest,
        simplex,
    }
}

fn shape_scale(a: &[Vec3], b: &[Vec3]) -> f64 {
    let span = |pts: &[Vec3]| {
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    };
    span(a).max(span(b)).max(1e-12)
}

/// Signed proximity of the convex hulls of `a` and `b`.
pub fn proximity(a: &[Vec3], b: &[Vec3]) -> Proximity {
    assert!(!a.is_empty() && !b.is_empty(), "shapes need vertices");
    let scale = shape_scale(a, b);
    let g = gjk(a, b, scale);
    if g.distance > 0.0 {
        let point_a: Vec3 = g.closest.iter().map(|(s, l)| s.a * *l).sum();
        let point_b: Vec3 = g.closest.iter().map(|(s, l)| s.b * *l).sum();
        let normal = (point_a - point_b) / g.distance;
        return Proximity {
            depth: -g.distance,
            normal,
            point_a,
            point_b,
        };
    }
    epa(a, b, g.simplex, scale)
}

/// Expands a touching simplex into a full tetrahedron around the origin.
fn blow_up(a: &[Vec3], b: &[Vec3], mut simplex: Vec<SupportPoint>, scale: f64) -> Option<Vec<SupportPoint>> {
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let tiny = scale * 1e-10;
    let push_new = |simplex: &mut Vec<SupportPoint>, dir: Vec3| -> bool {
        for d in [dir, -dir] {
            let s = support(a, b, &d);
            if simplex.iter().all(|p| (p.w - s.w).norm() > tiny) {
                simplex.push(s);
                return true;
            }
        }
        false
    };
    if simplex.len() == 1 {
        for ax in axes {
            if push_new(&mut simplex, ax) {
                break;
            }
        }
    }
    if simplex.len() == 2 {
        let d = simplex[1].w - simplex[0].w;
        let mut done = false;
        for ax in axes {
            let perp = d.cross(&ax);
            if perp.norm() > tiny && push_new(&mut simplex, perp) {
                done = true;
                break;
            }
        }
        if !done {
            return None;
        }
    }
    if simplex.len() == 3 {
        let n = (simplex[1].w - simplex[0].w).cross(&(simplex[2].w - simplex[0].w));
        if n.norm() <= tiny * tiny || !push_new(&mut simplex, n) {
            return None;
        }
    }
    let m = Matrix3::from_columns(&[
        simplex[1].w - simplex[0].w,
        simplex[2].w - simplex[0].w,
        simplex[3].w - simplex[0].w,
    ]);
    if m.determinant().abs() <= (tiny * 1e2).powi(3) {
        return None;
    }
    Some(simplex)
}

struct EpaFace {
    v: [usize; 3],
    normal: Vec3,
    dist: f64,
}

fn make_face(pts: &[SupportPoint], v: [usize; 3], interior: &Vec3) -> Option<EpaFace> {
    let [p0, p1, p2] = v.map(|i| pts[i].w);
    let n = (p1 - p0).cross(&(p2 - p0));
    let len = n.norm();
    if len == 0.0 || !len.is_finite() {
        return None;
    }
    let mut normal = n / len;
    let mut v = v;
    if normal.dot(&(p0 - interior)) < 0.0 {
        normal = -normal;
        v.swap(1, 2);
    }
    Some(EpaFace {
        v,
        normal,
        dist: normal.dot(&p0),
    })
}

fn epa(a: &[Vec3], b: &[Vec3], simplex: Vec<SupportPoint>, scale: f64) -> Proximity {
    let touching = |p: Vec3| Proximity {
        depth: 0.0,
        normal: Vec3::z(),
        point_a: p,
        point_b: p,
    };
    let Some(tet) = blow_up(a, b, simplex.clone(), scale) else {
        let p = simplex.first().map(|s| (s.a + s.b) * 0.5).unwrap_or(a[0]);
        return touching(p);
    };

    let mut pts = tet;
    let interior = pts.iter().map(|p| p.w).sum::<Vec3>() / 4.0;
    let mut faces: Vec<EpaFace> = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
        .into_iter()
        .filter_map(|f| make_face(&pts, f, &interior))
        .collect();
    let tol = scale * 1e-12;

    let mut best_face = 0;
    for _ in 0..EPA_MAX_ITERATIONS {
        best_face = 0;
        for (i, f) in faces.iter().enumerate() {
            if f.dist < faces[best_face].dist {
                best_face = i;
            }
        }
        let f = &faces[best_face];
        let s = support(a, b, &f.normal);
        let d = s.w.dot(&f.normal);
        if d - f.dist <= tol || pts.iter().any(|p| p.w == s.w) {
            break;
        }
        pts.push(s);
        let new_idx = pts.len() - 1;

        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut kept = Vec::with_capacity(faces.len());
        for face in faces.drain(..) {
            if face.normal.dot(&(s.w - pts[face.v[0]].w)) > tol {
                for e in 0..3 {
                    let edge = (face.v[e], face.v[(e + 1) % 3]);
                    if let Some(pos) = edges.iter().position(|&(x, y)| x == edge.1 && y == edge.0) {
                        edges.swap_remove(pos);
                    } else {
                        edges.push(edge);
                    }
                }
            } else {
                kept.push(face);
            }
        }
        faces = kept;
        for (x, y) in edges {
            if let Some(face) = make_face(&pts, [x, y, new_idx], &interior) {
                faces.push(face);
            }
        }
        if faces.is_empty() {
            return touching(s.a);
        }
    }

    let f = &faces[best_face];
    let [p0, p1, p2] = f.v.map(|i| pts[i]);
    let proj = f.normal * f.dist;
    let lambda = affine_barycentric(&[p0.w - proj, p1.w - proj, p2.w - proj]).unwrap_or_else(|| vec![1.0 / 3.0; 3]);
    let point_a = p0.a * lambda[0] + p1.a * lambda[1] + p2.a * lambda[2];
    let point_b = p0.b * lambda[0] + p1.b * lambda[1] + p2.b * lambda[2];
    Proximity {
        depth: f.dist.max(0.0),
        normal: -f.normal,
        point_a,
        point_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(center: Vec3, half: f64) -> Vec<Vec3> {
        (0..8)
            .map(|i| {
                center
                    + Vec3::new(
                        if i & 1 == 0 { -half } else { half },
                        if i & 2 == 0 { -half } else { half },
                        if i & 4 == 0 { -half } else { half },
                    )
            })
            .collect()
    }

    #[test]
    fn overlapping_unit_cubes() {
        let a = cube(Vec3::zeros(), 0.5);
        let b = cube(Vec3::new(0.99, 0.0, 0.0), 0.5);
        let p = proximity(&a, &b);
        assert!((p.depth - 0.01).abs() < 1e-12, "{p:?}");
        assert!((p.normal - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn separated_unit_cubes() {
        let a = cube(Vec3::zeros(), 0.5);
        let b = cube(Vec3::new(2.0, 0.0, 0.0), 0.5);
        let p = proximity(&a, &b);
        assert!((p.depth + 1.0).abs() < 1e-12, "{p:?}");
        assert!((p.normal - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn touching_cubes_have_zero_depth() {
        let a = cube(Vec3::zeros(), 0.5);
        let b = cube(Vec3::new(1.0, 0.3, 0.0), 0.5);
        let p = proximity(&a, &b);
        assert!(p.depth.abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn deep_overlap_picks_shallowest_axis() {
        let a = cube(Vec3::zeros(), 0.5);
        let b = cube(Vec3::new(0.1, 0.0, 0.7), 0.5);
        let p = proximity(&a, &b);
        assert!((p.depth - 0.3).abs() < 1e-12, "{p:?}");
        assert!((p.normal - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
    }

    #[test]
    fn vertex_to_vertex_distance() {
        let a = cube(Vec3::zeros(), 0.5);
        let b = cube(Vec3::new(2.0, 2.0, 2.0), 0.5);
        let p = proximity(&a, &b);
        assert!((p.depth + 3f64.sqrt()).abs() < 1e-12, "{p:?}");
        assert!((p.point_a - Vec3::repeat(0.5)).norm() < 1e-9);
    }
}
