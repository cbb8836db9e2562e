//! Domain-randomized scene sampling: part selection and settling, materials,
//! lights and camera, all driven by one per-frame seed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{PartCatalog, PartClass};
use crate::geom::{Aabb, Vec3};
use crate::physics::{self, PhysicsError, PoseState, SettleParams, WorldState};
use crate::seed::derive_frame_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RandomizerError {
    #[error("variant FIX_REFINED is ingest-only and cannot be generated")]
    NotGeneratable,
    #[error("class {class} has no region named {region:?}")]
    UnknownRegion { class: String, region: String },
    #[error("frame {frame_index}: parts did not settle after {attempts} drops")]
    Unsettled { frame_index: u64, attempts: usize },
    #[error("frame {frame_index}: {source}")]
    Physics { frame_index: u64, source: PhysicsError },
    #[error("invalid scene parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetVariant {
    #[serde(rename = "FIX")]
    Fix,
    #[serde(rename = "RAND_NO_TEX")]
    RandNoTex,
    #[serde(rename = "RAND_TEX")]
    RandTex,
    #[serde(rename = "FIX_REFINED")]
    FixRefined,
}

impl DatasetVariant {
    pub const ALL: [DatasetVariant; 4] = [Self::Fix, Self::RandNoTex, Self::RandTex, Self::FixRefined];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Fix => "FIX",
            Self::RandNoTex => "RAND_NO_TEX",
            Self::RandTex => "RAND_TEX",
            Self::FixRefined => "FIX_REFINED",
        }
    }

    pub fn textured(self) -> bool {
        self == Self::RandTex
    }
}

impl fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DatasetVariant {
    type Err = String;

    /// Accepts the tag in any case, with `-` or `_` separators.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        match norm.as_str() {
            "FIX" => Ok(Self::Fix),
            "RAND_NO_TEX" => Ok(Self::RandNoTex),
            "RAND_TEX" => Ok(Self::RandTex),
            "FIX_REFINED" => Ok(Self::FixRefined),
            _ => Err(format!("unknown dataset variant {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub position: Vec3,
    pub color: [f64; 3],
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextureKind {
    Checker,
    ValueNoise,
    Stripes,
}

impl TextureKind {
    pub const ALL: [TextureKind; 3] = [Self::Checker, Self::ValueNoise, Self::Stripes];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub kind: TextureKind,
    /// Spatial frequency in cycles per meter.
    pub scale: f64,
    pub secondary: [f64; 3],
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub base_color: [f64; 3],
    pub texture: Option<Texture>,
    pub specular: f64,
    pub reflectivity: f64,
    /// Emits its albedo directly instead of being lit.
    #[serde(default)]
    pub unlit: bool,
}

impl MaterialSpec {
    pub fn matte(base_color: [f64; 3]) -> Self {
        Self {
            base_color,
            texture: None,
            specular: 0.0,
            reflectivity: 0.0,
            unlit: false,
        }
    }
}

/// Pinhole camera frame. `forward`, `right` and `up` are orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl CameraPose {
    /// Camera at `position` looking at the world origin with zero roll.
    pub fn look_at_origin(position: Vec3) -> Self {
        let forward = (-position).normalize();
        let side = forward.cross(&Vec3::z());
        let (right, up) = if side.norm() < 1e-12 {
            (Vec3::x(), Vec3::y())
        } else {
            let right = side.normalize();
            (right, right.cross(&forward))
        };
        Self {
            position,
            forward,
            right,
            up,
        }
    }
}

/// One placed part with a material per mesh sub-group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub instance_id: u16,
    pub class_id: u16,
    pub pose: PoseState,
    pub materials: BTreeMap<String, MaterialSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub variant: DatasetVariant,
    pub frame_index: u64,
    pub frame_seed: u64,
    pub instances: Vec<SceneInstance>,
    pub floor_material: MaterialSpec,
    pub lights: Vec<Light>,
    pub camera: CameraPose,
}

/// Sampling ranges for scene generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub max_per_class: u32,
    pub light_count: [usize; 2],
    pub light_region: Aabb,
    pub light_intensity: [f64; 2],
    pub camera_region: Aabb,
    pub drop_region: Aabb,
    /// Re-drops attempted after the first settle fails to converge.
    pub settle_retries: usize,
    pub settle: SettleParams,
    /// Texture frequency ranges (cycles per meter) for parts and the floor.
    pub part_texture_scale: [f64; 2],
    pub floor_texture_scale: [f64; 2],
    pub max_reflectivity: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            max_per_class: 2,
            light_count: [1, 4],
            light_region: Aabb::new(Vec3::new(-0.25, -0.25, 0.5), Vec3::new(0.25, 0.25, 1.0)),
            light_intensity: [0.5, 2.0],
            camera_region: default_camera_region(),
            drop_region: physics::default_drop_region(),
            settle_retries: 3,
            settle: SettleParams::default(),
            part_texture_scale: [100.0, 300.0],
            floor_texture_scale: [5.0, 30.0],
            max_reflectivity: 0.3,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), RandomizerError> {
        let [lo, hi] = self.light_count;
        if lo < 1 || hi < lo {
            return Err(RandomizerError::InvalidParams("light count range must satisfy 1 <= min <= max"));
        }
        let [ilo, ihi] = self.light_intensity;
        if !(ilo >= 0.0 && ihi >= ilo && ihi.is_finite()) {
            return Err(RandomizerError::InvalidParams("light intensity range must be finite and non-negative"));
        }
        if self.max_per_class == 0 {
            return Err(RandomizerError::InvalidParams("max_per_class must be at least 1"));
        }
        for r in [&self.light_region, &self.camera_region, &self.drop_region] {
            if r.is_empty() {
                return Err(RandomizerError::InvalidParams("empty sampling region"));
            }
        }
        if self.camera_region.contains_box(&Aabb::new(Vec3::zeros(), Vec3::zeros()), 0.0) {
            return Err(RandomizerError::InvalidParams("camera region must exclude the origin"));
        }
        for [lo, hi] in [self.part_texture_scale, self.floor_texture_scale] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(RandomizerError::InvalidParams("texture scale range must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.max_reflectivity) {
            return Err(RandomizerError::InvalidParams("max_reflectivity must lie in [0,1]"));
        }
        self.settle
            .validate()
            .map_err(|_| RandomizerError::InvalidParams("invalid settle parameters"))
    }
}

/// The 20 cm by 20 cm by 10 cm prism the camera is drawn from.
pub fn default_camera_region() -> Aabb {
    Aabb::new(Vec3::new(-0.10, -0.10, 0.10), Vec3::new(0.10, 0.10, 0.20))
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, region: &Aabb) -> Vec3 {
    Vec3::from_fn(|k, _| {
        let (lo, hi) = (region.min[k], region.max[k]);
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    })
}

fn uniform_range<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn random_color<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

pub fn sample_camera<R: Rng + ?Sized>(rng: &mut R) -> CameraPose {
    sample_camera_in(rng, &default_camera_region())
}

pub fn sample_camera_in<R: Rng + ?Sized>(rng: &mut R, region: &Aabb) -> CameraPose {
    CameraPose::look_at_origin(uniform_in(rng, region))
}

pub fn sample_lights<R: Rng + ?Sized>(
    rng: &mut R,
    count_range: [usize; 2],
    region: &Aabb,
    intensity_range: [f64; 2],
) -> Vec<Light> {
    let [lo, hi] = count_range;
    let count = rng.gen_range(lo.max(1)..=hi.max(lo).max(1));
    (0..count)
        .map(|_| Light {
            position: uniform_in(rng, region),
            color: random_color(rng),
            intensity: uniform_range(rng, intensity_range),
        })
        .collect()
}

fn sample_texture<R: Rng + ?Sized>(rng: &mut R, scale: [f64; 2]) -> Texture {
    Texture {
        kind: *TextureKind::ALL.choose(rng).expect("non-empty"),
        scale: uniform_range(rng, scale),
        secondary: random_color(rng),
        seed: rng.gen(),
    }
}

fn randomized<R: Rng + ?Sized>(variant: DatasetVariant, rng: &mut R, texture_scale: [f64; 2], max_reflectivity: f64) -> MaterialSpec {
    MaterialSpec {
        base_color: random_color(rng),
        specular: rng.gen(),
        reflectivity: rng.gen::<f64>() * max_reflectivity,
        texture: variant.textured().then(|| sample_texture(rng, texture_scale)),
        unlit: false,
    }
}

fn fixed_part_material(color: [f64; 3]) -> MaterialSpec {
    MaterialSpec {
        specular: 0.3,
        ..MaterialSpec::matte(color)
    }
}

/// Material for one region (mesh sub-group) of a part.
pub fn sample_material<R: Rng + ?Sized>(
    variant: DatasetVariant,
    rng: &mut R,
    class: &PartClass,
    region: &str,
) -> Result<MaterialSpec, RandomizerError> {
    let defaults = SceneParams::default();
    sample_material_with(variant, rng, class, region, &defaults)
}

fn sample_material_with<R: Rng + ?Sized>(
    variant: DatasetVariant,
    rng: &mut R,
    class: &PartClass,
    region: &str,
    params: &SceneParams,
) -> Result<MaterialSpec, RandomizerError> {
    let unknown = || RandomizerError::UnknownRegion {
        class: class.name.clone(),
        region: region.to_string(),
    };
    match variant {
        DatasetVariant::FixRefined => Err(RandomizerError::NotGeneratable),
        DatasetVariant::Fix => class.palette.get(region).map(|c| fixed_part_material(*c)).ok_or_else(unknown),
        _ => {
            if !class.palette.contains_key(region) && !class.mesh.group_names().iter().any(|g| g == region) {
                return Err(unknown());
            }
            Ok(randomized(variant, rng, params.part_texture_scale, params.max_reflectivity))
        }
    }
}

/// Floor material. FIX scenes get a uniformly white, unlit floor.
pub fn sample_floor_material<R: Rng + ?Sized>(
    variant: DatasetVariant,
    rng: &mut R,
    params: &SceneParams,
) -> Result<MaterialSpec, RandomizerError> {
    match variant {
        DatasetVariant::FixRefined => Err(RandomizerError::NotGeneratable),
        DatasetVariant::Fix => Ok(MaterialSpec {
            unlit: true,
            ..MaterialSpec::matte([1.0, 1.0, 1.0])
        }),
        _ => Ok(MaterialSpec {
            specular: 0.0,
            ..randomized(variant, rng, params.floor_texture_scale, params.max_reflectivity)
        }),
    }
}

/// Class ids with multiplicity, each class drawn 0..=max times, at least one part overall.
fn sample_parts<R: Rng + ?Sized>(rng: &mut R, catalog: &PartCatalog, max_per_class: u32) -> Vec<u16> {
    loop {
        let mut parts = Vec::new();
        for class in &catalog.classes {
            let n = rng.gen_range(0..=max_per_class);
            parts.extend(std::iter::repeat_n(class.class_id, n as usize));
        }
        if !parts.is_empty() {
            return parts;
        }
    }
}

/// Samples, settles and dresses the scene for one frame.
pub fn sample_scene(
    variant: DatasetVariant,
    catalog: &PartCatalog,
    master_seed: u64,
    frame_index: u64,
    params: &SceneParams,
) -> Result<SceneSpec, RandomizerError> {
    if variant == DatasetVariant::FixRefined {
        return Err(RandomizerError::NotGeneratable);
    }
    params.validate()?;
    let frame_seed = derive_frame_seed(master_seed, frame_index);
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    let physics_err = |source| RandomizerError::Physics { frame_index, source };

    let parts = sample_parts(&mut rng, catalog, params.max_per_class);
    let mut settled = None;
    for _ in 0..=params.settle_retries {
        let poses = physics::sample_spawn_poses(&parts, catalog, &mut rng, &params.drop_region).map_err(physics_err)?;
        let world = WorldState::from_catalog(catalog, &parts, &poses).map_err(physics_err)?;
        let result = physics::settle(&world, &params.settle).map_err(physics_err)?;
        if result.converged {
            settled = Some(result.world);
            break;
        }
    }
    let world = settled.ok_or(RandomizerError::Unsettled {
        frame_index,
        attempts: params.settle_retries + 1,
    })?;

    let mut instances = Vec::with_capacity(parts.len());
    for (k, body) in world.bodies.iter().enumerate() {
        let class = catalog.get(body.class_id).expect("class checked by physics");
        let mut materials = BTreeMap::new();
        for region in class.mesh.group_names() {
            let m = sample_material_with(variant, &mut rng, class, &region, params)?;
            materials.insert(region, m);
        }
        let mut pose = body.pose;
        pose.linear_velocity = Vec3::zeros();
        pose.angular_velocity = Vec3::zeros();
        instances.push(SceneInstance {
            instance_id: u16::try_from(k + 1).map_err(|_| RandomizerError::InvalidParams("too many instances"))?,
            class_id: body.class_id,
            pose,
            materials,
        });
    }
    let floor_material = sample_floor_material(variant, &mut rng, params)?;
    let lights = sample_lights(&mut rng, params.light_count, &params.light_region, params.light_intensity);
    let camera = sample_camera_in(&mut rng, &params.camera_region);
    Ok(SceneSpec {
        variant,
        frame_index,
        frame_seed,
        instances,
        floor_material,
        lights,
        camera,
    })
}
