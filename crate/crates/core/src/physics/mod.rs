//! Rigid-body settling of dropped parts on a floor plane.
//!
//! Bodies collide through their convex proxies. Each step integrates
//! semi-implicitly, solves contacts with sequential impulses (warm-started,
//! Coulomb friction, restitution) and corrects penetration with split
//! impulses plus a positional guard.

mod collide;
mod solver;

use std::sync::Arc;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::PartCatalog;
use crate::geom::{Aabb, Vec3};
use crate::mesh::ConvexHull;

pub use collide::{proximity, Proximity};
pub use solver::ContactKey;

pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

/// Consecutive below-threshold steps required to call a world settled.
pub const REST_STEPS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("no parts to simulate")]
    EmptyParts,
    #[error("unknown class id {0}")]
    UnknownClass(u16),
    #[error("drop region must lie above the floor")]
    RegionBelowFloor,
    #[error("non-finite state in body {0}")]
    NonFinite(usize),
    #[error("invalid settle parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseState {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
}

impl PoseState {
    pub fn at_rest(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }

    pub fn transform(&self, local: &Vec3) -> Vec3 {
        self.orientation * local + self.position
    }

    pub fn is_finite(&self) -> bool {
        let q = self.orientation.quaternion();
        self.position.iter().all(|c| c.is_finite())
            && q.coords.iter().all(|c| c.is_finite())
            && self.linear_velocity.iter().all(|c| c.is_finite())
            && self.angular_velocity.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct Body {
    pub class_id: u16,
    /// Hull in body coordinates; the origin is the center of mass.
    pub hull: Arc<ConvexHull>,
    pub mass: f64,
    /// Isotropic rotational inertia.
    pub inertia: f64,
    pub pose: PoseState,
}

impl Body {
    pub fn world_vertices(&self) -> Vec<Vec3> {
        self.hull.vertices.iter().map(|v| self.pose.transform(v)).collect()
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.pose.linear_velocity.norm_squared()
            + 0.5 * self.inertia * self.pose.angular_velocity.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SettleParams {
    pub dt: f64,
    pub restitution: f64,
    pub friction: f64,
    pub rest_lin_speed: f64,
    pub rest_ang_speed: f64,
    pub max_steps: usize,
    pub max_penetration: f64,
    /// Penetration left uncorrected by the split impulse.
    pub slop: f64,
    pub iterations: usize,
    pub baumgarte: f64,
    /// Extra speculative contact distance on top of per-step travel.
    pub contact_margin: f64,
    /// Approach speeds below this never bounce.
    pub restitution_threshold: f64,
    pub linear_damping: f64,
    pub angular_damping: f64,
}

impl Default for SettleParams {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            restitution: 0.1,
            friction: 0.6,
            rest_lin_speed: 1e-3,
            rest_ang_speed: 1e-2,
            max_steps: 5000,
            max_penetration: 1e-4,
            slop: 5e-5,
            iterations: 8,
            baumgarte: 0.2,
            contact_margin: 5e-4,
            restitution_threshold: 0.05,
            linear_damping: 0.0,
            angular_damping: 0.5,
        }
    }
}

impl SettleParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.dt) {
            return Err(PhysicsError::InvalidParams("dt must be positive"));
        }
        if self.max_steps == 0 || self.iterations == 0 {
            return Err(PhysicsError::InvalidParams("step and iteration counts must be positive"));
        }
        if !(positive(self.rest_lin_speed) && positive(self.rest_ang_speed) && positive(self.max_penetration)) {
            return Err(PhysicsError::InvalidParams("thresholds must be positive"));
        }
        if !(self.slop >= 0.0 && self.slop < self.max_penetration) {
            return Err(PhysicsError::InvalidParams("slop must lie in [0, max_penetration)"));
        }
        if !(0.0..=1.0).contains(&self.restitution) || self.friction < 0.0 {
            return Err(PhysicsError::InvalidParams("restitution in [0,1], friction >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub bodies: Vec<Body>,
    pub gravity: Vec3,
    pub time: f64,
    /// Accumulated contact impulses from the previous step, for warm starting.
    pub(crate) warm: std::collections::HashMap<ContactKey, [f64; 6]>,
}

impl WorldState {
    pub fn new(bodies: Vec<Body>) -> Self {
        Self {
            bodies,
            gravity: GRAVITY,
            time: 0.0,
            warm: Default::default(),
        }
    }

    /// Places one body per class id at the given poses.
    pub fn from_catalog(
        catalog: &PartCatalog,
        parts: &[u16],
        poses: &[PoseState],
    ) -> Result<Self, PhysicsError> {
        if parts.is_empty() {
            return Err(PhysicsError::EmptyParts);
        }
        let bodies = parts
            .iter()
            .zip(poses)
            .map(|(&id, pose)| {
                let class = catalog.get(id).ok_or(PhysicsError::UnknownClass(id))?;
                Ok(Body {
                    class_id: id,
                    hull: Arc::new(class.convex_proxy.clone()),
                    mass: class.mass,
                    inertia: class.inertia,
                    pose: *pose,
                })
            })
            .collect::<Result<Vec<_>, PhysicsError>>()?;
        Ok(Self::new(bodies))
    }

    /// Kinetic plus gravitational potential energy (floor at z = 0).
    pub fn mechanical_energy(&self) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.kinetic_energy() - b.mass * self.gravity.dot(&b.pose.position))
            .sum()
    }

    pub fn poses(&self) -> Vec<PoseState> {
        self.bodies.iter().map(|b| b.pose).collect()
    }

    fn check_finite(&self) -> Result<(), PhysicsError> {
        match self.bodies.iter().position(|b| !b.pose.is_finite()) {
            Some(i) => Err(PhysicsError::NonFinite(i)),
            None => Ok(()),
        }
    }

    fn at_rest(&self, params: &SettleParams) -> bool {
        self.bodies.iter().all(|b| {
            b.pose.linear_velocity.norm() < params.rest_lin_speed
                && b.pose.angular_velocity.norm() < params.rest_ang_speed
        })
    }
}

/// Advances `world` by one `params.dt`.
pub fn step(world: &WorldState, params: &SettleParams) -> Result<WorldState, PhysicsError> {
    let mut next = world.clone();
    step_in_place(&mut next, params)?;
    Ok(next)
}

pub fn step_in_place(world: &mut WorldState, params: &SettleParams) -> Result<(), PhysicsError> {
    params.validate()?;
    if world.bodies.is_empty() {
        return Err(PhysicsError::EmptyParts);
    }
    world.check_finite()?;
    solver::advance(world, params);
    world.check_finite()
}

#[derive(Debug, Clone)]
pub struct SettleResult {
    pub world: WorldState,
    pub steps: usize,
    pub converged: bool,
}

impl SettleResult {
    pub fn poses(&self) -> Vec<PoseState> {
        self.world.poses()
    }
}

/// Steps until every body stays below the rest speeds for [`REST_STEPS`]
/// consecutive steps, or `max_steps` is reached.
pub fn settle(world: &WorldState, params: &SettleParams) -> Result<SettleResult, PhysicsError> {
    params.validate()?;
    let mut world = world.clone();
    let mut calm = 0;
    for steps in 1..=params.max_steps {
        step_in_place(&mut world, params)?;
        if world.at_rest(params) {
            calm += 1;
            if calm >= REST_STEPS {
                return Ok(SettleResult {
                    world,
                    steps,
                    converged: true,
                });
            }
        } else {
            calm = 0;
        }
    }
    Ok(SettleResult {
        world,
        steps: params.max_steps,
        converged: false,
    })
}

/// Signed depth between two posed hulls: positive overlap, or negated gap.
pub fn penetration_depth(a: &ConvexHull, pose_a: &PoseState, b: &ConvexHull, pose_b: &PoseState) -> f64 {
    let va: Vec<Vec3> = a.vertices.iter().map(|v| pose_a.transform(v)).collect();
    let vb: Vec<Vec3> = b.vertices.iter().map(|v| pose_b.transform(v)).collect();
    proximity(&va, &vb).depth
}

/// Uniformly distributed rotation (Shoemake's method).
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t2, t3) = (std::f64::consts::TAU * u2, std::f64::consts::TAU * u3);
    UnitQuaternion::new_normalize(Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin()))
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, region: &Aabb) -> Vec3 {
    Vec3::from_fn(|k, _| {
        let (lo, hi) = (region.min[k], region.max[k]);
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    })
}

/// Random positions in `drop_region` and uniform orientations, at rest.
pub fn sample_initial_poses<R: Rng + ?Sized>(
    parts: &[u16],
    catalog: &PartCatalog,
    rng: &mut R,
    drop_region: &Aabb,
) -> Result<Vec<PoseState>, PhysicsError> {
    if parts.is_empty() {
        return Err(PhysicsError::EmptyParts);
    }
    if drop_region.min.z <= 0.0 || drop_region.is_empty() {
        return Err(PhysicsError::RegionBelowFloor);
    }
    parts
        .iter()
        .map(|&id| {
            catalog.get(id).ok_or(PhysicsError::UnknownClass(id))?;
            let position = uniform_in(rng, drop_region);
            Ok(PoseState::at_rest(position, uniform_rotation(rng)))
        })
        .collect()
}

/// Like [`sample_initial_poses`], but redraws a position (up to a fixed
/// budget) while its bounding sphere overlaps an earlier part's.
pub fn sample_spawn_poses<R: Rng + ?Sized>(
    parts: &[u16],
    catalog: &PartCatalog,
    rng: &mut R,
    drop_region: &Aabb,
) -> Result<Vec<PoseState>, PhysicsError> {
    let mut poses = sample_initial_poses(parts, catalog, rng, drop_region)?;
    let radius: Vec<f64> = parts
        .iter()
        .map(|&id| catalog.get(id).map(|c| c.bounding_radius()).unwrap_or(0.0))
        .collect();
    for i in 1..poses.len() {
        for _ in 0..64 {
            let clear = (0..i).all(|j| {
                (poses[i].position - poses[j].position).norm() > radius[i] + radius[j]
            });
            if clear {
                break;
            }
            poses[i].position = uniform_in(rng, drop_region);
        }
    }
    Ok(poses)
}

/// Default drop region: the 0.20 m camera footprint, 5 to 15 cm above the floor.
pub fn default_drop_region() -> Aabb {
    Aabb::new(Vec3::new(-0.10, -0.10, 0.05), Vec3::new(0.10, 0.10, 0.15))
}
