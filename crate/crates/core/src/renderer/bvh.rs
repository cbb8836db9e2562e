//! Bounding volume hierarchy over world-space triangles.

use crate::geom::{Aabb, Vec3};

use super::RenderError;

/// Nearest hits closer than this are ignored.
pub const T_MIN: f64 = 1e-6;
const MAX_LEAF: usize = 4;
/// Node boxes are padded so slab tests never reject a grazing hit.
const BOX_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self { origin, direction }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [Vec3; 3],
    pub instance_id: u16,
}

impl Triangle {
    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    fn centroid(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    /// Möller–Trumbore. Returns `(t, u, v)` for hits with `t > T_MIN`.
    pub fn intersect(&self, ray: &Ray) -> Option<(f64, f64, f64)> {
        let [a, b, c] = self.vertices;
        let (e1, e2) = (b - a, c - a);
        let p = ray.direction.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-18 {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = ray.direction.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(&q) * inv;
        (t > T_MIN).then_some((t, u, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    pub instance_id: u16,
    /// Barycentric weights of the second and third vertex.
    pub u: f64,
    pub v: f64,
}

impl Hit {
    fn closer_than(&self, other: &Option<Hit>) -> bool {
        match other {
            None => true,
            Some(o) => self.t < o.t || (self.t == o.t && self.triangle < o.triangle),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    /// Child node indices.
    Inner { left: u32, right: u32 },
    /// Range into the ordered triangle index list.
    Leaf { start: u32, count: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    /// Median split on the longest centroid axis, leaves of at most four triangles.
    pub fn build(triangles: Vec<Triangle>) -> Result<Self, RenderError> {
        if triangles.is_empty() {
            return Err(RenderError::EmptyGeometry);
        }
        if triangles.iter().any(|t| t.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite()))) {
            return Err(RenderError::NonFiniteGeometry);
        }
        let centroids: Vec<Vec3> = triangles.iter().map(Triangle::centroid).collect();
        let bounds: Vec<Aabb> = triangles.iter().map(Triangle::bounds).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len());
        build_node(&mut nodes, &mut order, 0, &centroids, &bounds);
        Ok(Self { triangles, nodes, order })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Triangle indices held by a leaf node.
    pub fn leaf_triangles(&self, node: &Node) -> &[u32] {
        match node.kind {
            NodeKind::Leaf { start, count } => &self.order[start as usize..(start + count) as usize],
            NodeKind::Inner { .. } => &[],
        }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    fn test(&self, index: u32, ray: &Ray, best: &mut Option<Hit>) {
        let tri = &self.triangles[index as usize];
        if let Some((t, u, v)) = tri.intersect(ray) {
            let hit = Hit {
                t,
                triangle: index as usize,
                instance_id: tri.instance_id,
                u,
                v,
            };
            if hit.closer_than(best) {
                *best = Some(hit);
            }
        }
    }

    /// Nearest hit; equal distances resolve to the lower triangle index.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<Hit> = None;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            let limit = best.map_or(f64::INFINITY, |h| h.t);
            if node.bounds.ray_entry(&ray.origin, &inv, limit).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { .. } => {
                    for &i in self.leaf_triangles(node) {
                        self.test(i, ray, &mut best);
                    }
                }
                NodeKind::Inner { left, right } => {
                    let entry = |c: u32| {
                        self.nodes[c as usize]
                            .bounds
                            .ray_entry(&ray.origin, &inv, limit)
                            .unwrap_or(f64::INFINITY)
                    };
                    // Push the farther child first so the nearer one is visited first.
                    if entry(left) <= entry(right) {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    /// Brute-force nearest hit over every triangle.
    pub fn intersect_linear(&self, ray: &Ray) -> Option<Hit> {
        let mut best = None;
        for i in 0..self.triangles.len() as u32 {
            self.test(i, ray, &mut best);
        }
        best
    }

    /// True if anything is hit with `T_MIN < t < t_max`.
    pub fn occluded(&self, ray: &Ray, t_max: f64) -> bool {
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bounds.ray_entry(&ray.origin, &inv, t_max).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { .. } => {
                    for &i in self.leaf_triangles(node) {
                        if matches!(self.triangles[i as usize].intersect(ray), Some((t, _, _)) if t < t_max) {
                            return true;
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }
}

fn build_node(nodes: &mut Vec<Node>, order: &mut [u32], offset: usize, centroids: &[Vec3], bounds: &[Aabb]) -> u32 {
    let mut b = Aabb::empty();
    for &i in order.iter() {
        b = b.union(&bounds[i as usize]);
    }
    let index = nodes.len() as u32;
    nodes.push(Node {
        bounds: b.expanded(BOX_PAD),
        kind: NodeKind::Leaf {
            start: offset as u32,
            count: order.len() as u32,
        },
    });
    if order.len() <= MAX_LEAF {
        return index;
    }
    let mut cb = Aabb::empty();
    for &i in order.iter() {
        cb.grow(&centroids[i as usize]);
    }
    let axis = cb.longest_axis();
    order.sort_by(|&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let mid = order.len() / 2;
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, centroids, bounds);
    let right = build_node(nodes, hi, offset + mid, centroids, bounds);
    // Children padded by BOX_PAD sit inside a parent padded by 2 * BOX_PAD.
    nodes[index as usize].bounds = b.expanded(2.0 * BOX_PAD);
    nodes[index as usize].kind = NodeKind::Inner { left, right };
    index
}
