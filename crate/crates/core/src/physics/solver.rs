use nalgebra::{UnitQuaternion, Vector2};

use super::collide::proximity;
use super::{SettleParams, WorldState};
use crate::geom::{Aabb, Vec3};

/// Vertices within this distance of a shape's extreme along the contact
/// normal form its contact feature.
const FEATURE_TOL: f64 = 2.5e-4;
/// Warm-start impulses are reused only if the contact moved less than this.
const WARM_MATCH_DIST: f64 = 1e-3;
const GUARD_PASSES: usize = 8;
const FLOOR: u32 = u32::MAX;

/// Identity of a contact across steps: body pair plus feature index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContactKey {
    a: u32,
    b: u32,
    feature: u32,
}

struct Contact {
    key: ContactKey,
    a: usize,
    b: Option<usize>,
    point: Vec3,
    normal: Vec3,
    tangents: [Vec3; 2],
    ra: Vec3,
    rb: Vec3,
    separation: f64,
    mass: [f64; 3],
    target: f64,
    impulse: [f64; 3],
    pseudo_impulse: f64,
}

struct Kinematics {
    v: Vec<Vec3>,
    w: Vec<Vec3>,
    inv_mass: Vec<f64>,
    inv_inertia: Vec<f64>,
}

impl Kinematics {
    fn relative(&self, c: &Contact) -> Vec3 {
        let mut rel = self.v[c.a] + self.w[c.a].cross(&c.ra);
        if let Some(b) = c.b {
            rel -= self.v[b] + self.w[b].cross(&c.rb);
        }
        rel
    }

    fn apply(&mut self, c: &Contact, p: Vec3) {
        self.v[c.a] += p * self.inv_mass[c.a];
        self.w[c.a] += c.ra.cross(&p) * self.inv_inertia[c.a];
        if let Some(b) = c.b {
            self.v[b] -= p * self.inv_mass[b];
            self.w[b] -= c.rb.cross(&p) * self.inv_inertia[b];
        }
    }

    fn effective_mass(&self, c: &Contact, dir: &Vec3) -> f64 {
        let mut k = self.inv_mass[c.a] + self.inv_inertia[c.a] * c.ra.cross(dir).norm_squared();
        if let Some(b) = c.b {
            k += self.inv_mass[b] + self.inv_inertia[b] * c.rb.cross(dir).norm_squared();
        }
        if k > 0.0 {
            1.0 / k
        } else {
            0.0
        }
    }
}

pub(crate) fn tangent_basis(n: &Vec3) -> [Vec3; 2] {
    let helper = if n.x.abs() < 0.57 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    [t1, n.cross(&t1)]
}

/// World-space face planes `(normal, offset)` of a posed hull.
fn world_planes(world: &WorldState, i: usize) -> Vec<(Vec3, f64)> {
    let body = &world.bodies[i];
    (0..body.hull.faces.len())
        .map(|f| {
            let (m, d) = body.hull.plane(f);
            let m = body.pose.orientation * m;
            (m, d + m.dot(&body.pose.position))
        })
        .collect()
}

/// Parameter interval of the line `origin + t * dir` inside a convex polytope.
fn line_interval(planes: &[(Vec3, f64)], origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (m, d) in planes {
        let denom = m.dot(dir);
        let num = d - m.dot(origin);
        if denom.abs() < 1e-12 {
            if num < -1e-12 {
                return None;
            }
        } else if denom > 0.0 {
            hi = hi.min(num / denom);
        } else {
            lo = lo.max(num / denom);
        }
    }
    (lo <= hi + 1e-9).then_some((lo, hi))
}

fn cross2(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
fn hull_2d(mut pts: Vec<Vector2<f64>>) -> Vec<Vector2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
    if pts.len() < 3 {
        return pts;
    }
    let mut out: Vec<Vector2<f64>> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = out.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while out.len() >= start + 2 && cross2(&out[out.len() - 2], &out[out.len() - 1], p) <= 1e-14 {
                out.pop();
            }
            out.push(*p);
        }
        out.pop();
    }
    if out.len() < 3 {
        // Collinear input: keep the two extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    out
}

/// Clips `subject` (polygon, segment or point) against the convex CCW polygon `clip`.
fn clip_polygon(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut out = subject.to_vec();
    let tol = 1e-9;
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
        let edge = c1 - c0;
        let len = edge.norm();
        let side = |p: &Vector2<f64>| cross2(&c0, &c1, p) / len;
        let input = std::mem::take(&mut out);
        let n = input.len();
        if n == 1 {
            if side(&input[0]) >= -tol {
                out.push(input[0]);
            }
            continue;
        }
        let closed = n > 2;
        let segs = if closed { n } else { 1 };
        for k in 0..segs {
            let (p, q) = (input[k], input[(k + 1) % n]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= -tol {
                out.push(p);
            }
            if (sp >= -tol) != (sq >= -tol) {
                let t = sp / (sp - sq);
                out.push(p + (q - p) * t);
            }
            if !closed && sq >= -tol {
                out.push(q);
            }
        }
        out.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    }
    out
}

struct PairManifold {
    points: Vec<(Vec3, f64)>,
    normal: Vec3,
}

fn pair_manifold(
    verts_a: &[Vec3],
    verts_b: &[Vec3],
    planes_a: &[(Vec3, f64)],
    planes_b: &[(Vec3, f64)],
    margin: f64,
) -> Option<PairManifold> {
    let prox = proximity(verts_a, verts_b);
    if -prox.depth > margin {
        return None;
    }
    let n = prox.normal;
    let [t1, t2] = tangent_basis(&n);
    let h_a = verts_a.iter().map(|a| a.dot(&n)).fold(f64::INFINITY, f64::min);
    let h_b = verts_b.iter().map(|b| b.dot(&n)).fold(f64::NEG_INFINITY, f64::max);
    let project = |p: &Vec3| Vector2::new(p.dot(&t1), p.dot(&t2));
    let feat_a: Vec<_> = verts_a.iter().filter(|a| a.dot(&n) <= h_a + FEATURE_TOL).map(project).collect();
    let feat_b: Vec<_> = verts_b.iter().filter(|b| b.dot(&n) >= h_b - FEATURE_TOL).map(project).collect();
    let (poly_a, poly_b) = (hull_2d(feat_a), hull_2d(feat_b));

    let region = match (poly_a.len() >= 3, poly_b.len() >= 3) {
        (true, true) => clip_polygon(&poly_a, &poly_b),
        (false, true) => clip_polygon(&poly_a, &poly_b),
        (true, false) => clip_polygon(&poly_b, &poly_a),
        (false, false) => Vec::new(),
    };

    let mut points = Vec::with_capacity(region.len());
    for q in &region {
        let origin = t1 * q.x + t2 * q.y;
        let (Some((enter_a, _)), Some((_, exit_b))) = (
            line_interval(planes_a, &origin, &n),
            line_interval(planes_b, &origin, &n),
        ) else {
            continue;
        };
        let s = enter_a - exit_b;
        if s <= margin {
            points.push((origin + n * (0.5 * (enter_a + exit_b)), s));
        }
    }
    if points.is_empty() {
        points.push(((prox.point_a + prox.point_b) * 0.5, -prox.depth));
    }
    Some(PairManifold { points, normal: n })
}

pub(crate) fn advance(world: &mut WorldState, params: &SettleParams) {
    let dt = params.dt;
    let count = world.bodies.len();

    let mut kin = Kinematics {
        v: Vec::with_capacity(count),
        w: Vec::with_capacity(count),
        inv_mass: world.bodies.iter().map(|b| 1.0 / b.mass).collect(),
        inv_inertia: world.bodies.iter().map(|b| 1.0 / b.inertia).collect(),
    };
    let lin_damp = 1.0 / (1.0 + params.linear_damping * dt);
    let ang_damp = 1.0 / (1.0 + params.angular_damping * dt);
    for b in &world.bodies {
        kin.v.push((b.pose.linear_velocity + world.gravity * dt) * lin_damp);
        kin.w.push(b.pose.angular_velocity * ang_damp);
    }

    let verts: Vec<Vec<Vec3>> = world.bodies.iter().map(|b| b.world_vertices()).collect();
    let margins: Vec<f64> = world
        .bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let radius = b.hull.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
            params.contact_margin + (kin.v[i].norm() + kin.w[i].norm() * radius) * dt
        })
        .collect();
    let boxes: Vec<Aabb> = verts
        .iter()
        .zip(&margins)
        .map(|(v, m)| Aabb::from_points(v.iter()).expanded(*m))
        .collect();

    // Approach speeds for restitution come from the velocities the step began with.
    let before = Kinematics {
        v: world.bodies.iter().map(|b| b.pose.linear_velocity).collect(),
        w: world.bodies.iter().map(|b| b.pose.angular_velocity).collect(),
        inv_mass: Vec::new(),
        inv_inertia: Vec::new(),
    };

    let mut contacts: Vec<Contact> = Vec::new();
    let push = |contacts: &mut Vec<Contact>, key, a, b: Option<usize>, point: Vec3, normal: Vec3, s: f64| {
        contacts.push(Contact {
            key,
            a,
            b,
            point,
            normal,
            tangents: tangent_basis(&normal),
            ra: point - world.bodies[a].pose.position,
            rb: b.map(|b| point - world.bodies[b].pose.position).unwrap_or_default(),
            separation: s,
            mass: [0.0; 3],
            target: 0.0,
            impulse: [0.0; 3],
            pseudo_impulse: 0.0,
        });
    };

    for (i, vs) in verts.iter().enumerate() {
        for (k, p) in vs.iter().enumerate() {
            if p.z < margins[i] {
                let key = ContactKey { a: i as u32, b: FLOOR, feature: k as u32 };
                push(&mut contacts, key, i, None, *p, Vec3::z(), p.z);
            }
        }
    }

    let planes: Vec<Vec<(Vec3, f64)>> = (0..count).map(|i| world_planes(world, i)).collect();
    let mut touching_pairs = Vec::new();
    for i in 0..count {
        for j in i + 1..count {
            if !boxes[i].overlaps(&boxes[j]) {
                continue;
            }
            let Some(m) = pair_manifold(&verts[i], &verts[j], &planes[i], &planes[j], margins[i] + margins[j]) else {
                continue;
            };
            touching_pairs.push((i, j));
            for (f, (p, s)) in m.points.into_iter().enumerate() {
                let key = ContactKey { a: i as u32, b: j as u32, feature: f as u32 };
                push(&mut contacts, key, i, Some(j), p, m.normal, s);
            }
        }
    }

    // Prepare and warm start.
    for c in &mut contacts {
        c.mass = [
            kin.effective_mass(c, &c.normal),
            kin.effective_mass(c, &c.tangents[0]),
            kin.effective_mass(c, &c.tangents[1]),
        ];
        let vn = before.relative(c).dot(&c.normal);
        c.target = if c.separation > 0.0 {
            -c.separation / dt
        } else if vn < -params.restitution_threshold {
            -params.restitution * vn
        } else {
            0.0
        };
        if let Some(cached) = world.warm.get(&c.key) {
            let (lambda, pos) = (&cached[..], Vec3::new(cached[3], cached[4], cached[5]));
            if (pos - c.point).norm() < WARM_MATCH_DIST {
                c.impulse = [lambda[0], lambda[1], lambda[2]];
                let p = c.normal * c.impulse[0] + c.tangents[0] * c.impulse[1] + c.tangents[1] * c.impulse[2];
                kin.apply(c, p);
            }
        }
    }

    for _ in 0..params.iterations {
        for c in &mut contacts {
            let limit = params.friction * c.impulse[0];
            for t in 0..2 {
                let vt = kin.relative(c).dot(&c.tangents[t]);
                let old = c.impulse[t + 1];
                let new = (old - vt * c.mass[t + 1]).clamp(-limit, limit);
                c.impulse[t + 1] = new;
                kin.apply(c, c.tangents[t] * (new - old));
            }
            let vn = kin.relative(c).dot(&c.normal);
            let old = c.impulse[0];
            let new = (old + (c.target - vn) * c.mass[0]).max(0.0);
            c.impulse[0] = new;
            kin.apply(c, c.normal * (new - old));
        }
    }

    // Split impulse: pseudo velocities that move positions but carry no momentum.
    let mut pseudo = Kinematics {
        v: vec![Vec3::zeros(); count],
        w: vec![Vec3::zeros(); count],
        inv_mass: kin.inv_mass.clone(),
        inv_inertia: kin.inv_inertia.clone(),
    };
    if contacts.iter().any(|c| c.separation < -params.slop) {
        for _ in 0..params.iterations {
            for c in &mut contacts {
                if c.separation >= -params.slop {
                    continue;
                }
                let target = params.baumgarte * (-c.separation - params.slop) / dt;
                let vn = pseudo.relative(c).dot(&c.normal);
                let old = c.pseudo_impulse;
                let new = (old + (target - vn) * c.mass[0]).max(0.0);
                c.pseudo_impulse = new;
                pseudo.apply(c, c.normal * (new - old));
            }
        }
    }

    for (i, b) in world.bodies.iter_mut().enumerate() {
        b.pose.linear_velocity = kin.v[i];
        b.pose.angular_velocity = kin.w[i];
        b.pose.position += (kin.v[i] + pseudo.v[i]) * dt;
        let spin = UnitQuaternion::from_scaled_axis((kin.w[i] + pseudo.w[i]) * dt);
        let mut q = spin * b.pose.orientation;
        q.renormalize();
        b.pose.orientation = q;
    }

    positional_guard(world, params, &touching_pairs);

    world.warm.clear();
    for c in &contacts {
        world.warm.insert(
            c.key,
            [c.impulse[0], c.impulse[1], c.impulse[2], c.point.x, c.point.y, c.point.z],
        );
    }
    world.time += dt;
}

/// Translates bodies apart until no floor or pair penetration exceeds
/// `max_penetration`, targeting `slop` depth.
fn positional_guard(world: &mut WorldState, params: &SettleParams, pairs: &[(usize, usize)]) {
    for _ in 0..GUARD_PASSES {
        let mut moved = false;
        for &(i, j) in pairs {
            let (va, vb) = (world.bodies[i].world_vertices(), world.bodies[j].world_vertices());
            let prox = proximity(&va, &vb);
            if prox.depth > params.max_penetration {
                let (ima, imb) = (1.0 / world.bodies[i].mass, 1.0 / world.bodies[j].mass);
                let corr = prox.normal * (prox.depth - params.slop) / (ima + imb);
                world.bodies[i].pose.position += corr * ima;
                world.bodies[j].pose.position -= corr * imb;
                moved = true;
            }
        }
        for b in &mut world.bodies {
            let min_z = b.hull.vertices.iter().map(|v| b.pose.transform(v).z).fold(f64::INFINITY, f64::min);
            if min_z < -params.max_penetration {
                b.pose.position.z += -min_z - params.slop;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal() {
        for n in [Vec3::z(), Vec3::x(), Vec3::new(1.0, 2.0, -3.0).normalize()] {
            let [t1, t2] = tangent_basis(&n);
            assert!(t1.dot(&n).abs() < 1e-12 && t2.dot(&n).abs() < 1e-12 && t1.dot(&t2).abs() < 1e-12);
            assert!((t1.norm() - 1.0).abs() < 1e-12 && (t2.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_clip_gives_overlap_square() {
        let sq = |x0: f64, y0: f64, s: f64| hull_2d(vec![
            Vector2::new(x0, y0),
            Vector2::new(x0 + s, y0),
            Vector2::new(x0 + s, y0 + s),
            Vector2::new(x0, y0 + s),
        ]);
        let out = clip_polygon(&sq(0.0, 0.0, 2.0), &sq(1.0, 1.0, 2.0));
        assert_eq!(out.len(), 4);
        let area: f64 = (0..4).map(|i| {
            let (p, q) = (out[i], out[(i + 1) % 4]);
            p.x * q.y - q.x * p.y
        }).sum::<f64>() / 2.0;
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_clip() {
        let sq = hull_2d(vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.0, 1.0),
        ]);
        let seg = vec![Vector2::new(-1.0, 0.5), Vector2::new(2.0, 0.5)];
        let out = clip_polygon(&seg, &sq);
        assert_eq!(out.len(), 2);
        assert!((out[0] - Vector2::new(0.0, 0.5)).norm() < 1e-12);
        assert!((out[1] - Vector2::new(1.0, 0.5)).norm() < 1e-12);
    }
}
