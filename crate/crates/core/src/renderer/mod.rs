//! Whitted-style ray tracer producing an RGB image and an instance-id map.
//!
//! Direct lighting from point lights with shadow rays, optional Blinn-Phong
//! highlights and mirror reflections. Each pixel draws its jitter from a
//! generator seeded by the frame seed and pixel index, so the output does
//! not depend on how rows are scheduled across threads.

mod bvh;
mod texture;

use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::PartCatalog;
use crate::geom::{triangle_cross, Vec3};
use crate::randomizer::{CameraPose, Light, MaterialSpec, SceneSpec};
use crate::seed::{splitmix64, SplitMix64};

pub use bvh::{Bvh, Hit, Node, NodeKind, Ray, Triangle, T_MIN};
pub use texture::{albedo, checker, procedural_texture, stripes, value_noise};

const SHININESS: i32 = 32;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("scene has no geometry")]
    EmptyGeometry,
    #[error("scene geometry contains non-finite coordinates")]
    NonFiniteGeometry,
    #[error("unknown class id {0}")]
    UnknownClass(u16),
    #[error("instance {instance} has no material for region {region:?}")]
    MissingMaterial { instance: u16, region: String },
    #[error("invalid render config: {0}")]
    InvalidConfig(&'static str),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub samples_per_pixel: u32,
    pub max_reflection_depth: u32,
    pub shadows: bool,
    /// Horizontal field of view in degrees.
    pub hfov_deg: f64,
    pub background: [f64; 3],
    pub floor: bool,
    /// Side of the square floor centered at the origin, in meters.
    pub floor_size: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 768,
            samples_per_pixel: 4,
            max_reflection_depth: 2,
            shadows: true,
            hfov_deg: 45.0,
            background: [0.0; 3],
            floor: true,
            floor_size: 1.0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidConfig("width and height must be at least 1"));
        }
        if self.samples_per_pixel == 0 {
            return Err(RenderError::InvalidConfig("samples_per_pixel must be at least 1"));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(RenderError::InvalidConfig("hfov_deg must lie in (0, 180)"));
        }
        if !(self.floor_size > 0.0 && self.floor_size.is_finite()) {
            return Err(RenderError::InvalidConfig("floor_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, three bytes per pixel.
    pub rgb: Vec<u8>,
    /// Row-major instance ids; 0 is floor or background.
    pub ids: Vec<u16>,
}

#[derive(Debug, Clone, Copy)]
struct Surface {
    material: usize,
    /// Object-local vertex positions, where textures are evaluated.
    local: [Vec3; 3],
    normal: Vec3,
}

/// World-space triangles, per-triangle surface data and the material table.
fn scene_geometry(
    scene: &SceneSpec,
    catalog: &PartCatalog,
    config: &RenderConfig,
) -> Result<(Vec<Triangle>, Vec<Surface>, Vec<MaterialSpec>), RenderError> {
    let mut tris = Vec::new();
    let mut surfaces = Vec::new();
    let mut materials = vec![scene.floor_material];

    if config.floor {
        let h = config.floor_size / 2.0;
        let c = [
            Vec3::new(-h, -h, 0.0),
            Vec3::new(h, -h, 0.0),
            Vec3::new(h, h, 0.0),
            Vec3::new(-h, h, 0.0),
        ];
        for v in [[c[0], c[1], c[2]], [c[0], c[2], c[3]]] {
            tris.push(Triangle { vertices: v, instance_id: 0 });
            surfaces.push(Surface {
                material: 0,
                local: v,
                normal: Vec3::z(),
            });
        }
    }

    for inst in &scene.instances {
        let class = catalog.get(inst.class_id).ok_or(RenderError::UnknownClass(inst.class_id))?;
        let mesh = &class.mesh;
        let mut slot = std::collections::BTreeMap::new();
        for t in 0..mesh.triangles.len() {
            let region = mesh.group_of(t);
            let material = match slot.get(region) {
                Some(&m) => m,
                None => {
                    let spec = inst.materials.get(region).ok_or_else(|| RenderError::MissingMaterial {
                        instance: inst.instance_id,
                        region: region.to_string(),
                    })?;
                    materials.push(*spec);
                    slot.insert(region.to_string(), materials.len() - 1);
                    materials.len() - 1
                }
            };
            let local = mesh.triangle_vertices(t);
            let world = local.map(|v| inst.pose.transform(&v));
            let n = triangle_cross(&world[0], &world[1], &world[2]);
            let normal = if n.norm() > 0.0 { n.normalize() } else { Vec3::z() };
            tris.push(Triangle {
                vertices: world,
                instance_id: inst.instance_id,
            });
            surfaces.push(Surface { material, local, normal });
        }
    }
    Ok((tris, surfaces, materials))
}

/// BVH over the scene's parts and floor.
pub fn build_bvh(scene: &SceneSpec, catalog: &PartCatalog) -> Result<Bvh, RenderError> {
    let (tris, _, _) = scene_geometry(scene, catalog, &RenderConfig::default())?;
    Bvh::build(tris)
}

/// A scene ready for tracing.
pub struct PreparedScene {
    bvh: Option<Bvh>,
    surfaces: Vec<Surface>,
    materials: Vec<MaterialSpec>,
    lights: Vec<Light>,
    camera: CameraPose,
    frame_seed: u64,
    config: RenderConfig,
    half_w: f64,
    half_h: f64,
}

impl PreparedScene {
    pub fn new(scene: &SceneSpec, catalog: &PartCatalog, config: &RenderConfig) -> Result<Self, RenderError> {
        config.validate()?;
        let (tris, surfaces, materials) = scene_geometry(scene, catalog, config)?;
        let bvh = if tris.is_empty() { None } else { Some(Bvh::build(tris)?) };
        let half_w = (config.hfov_deg.to_radians() / 2.0).tan();
        Ok(Self {
            bvh,
            surfaces,
            materials,
            lights: scene.lights.clone(),
            camera: scene.camera,
            frame_seed: scene.frame_seed,
            config: config.clone(),
            half_w,
            half_h: half_w * config.height as f64 / config.width as f64,
        })
    }

    pub fn bvh(&self) -> Option<&Bvh> {
        self.bvh.as_ref()
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    /// Camera ray through film position `(px + sx, py + sy)`, pixel units,
    /// `y` growing downward.
    pub fn camera_ray(&self, px: f64, py: f64) -> Ray {
        let (w, h) = (self.config.width as f64, self.config.height as f64);
        let x = (2.0 * px / w - 1.0) * self.half_w;
        let y = (1.0 - 2.0 * py / h) * self.half_h;
        let c = &self.camera;
        Ray::new(c.position, (c.forward + c.right * x + c.up * y).normalize())
    }

    pub fn center_ray(&self, px: u32, py: u32) -> Ray {
        self.camera_ray(px as f64 + 0.5, py as f64 + 0.5)
    }

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.bvh.as_ref().and_then(|b| b.intersect(ray))
    }

    /// Linear radiance along a ray; background on a miss.
    pub fn trace(&self, ray: &Ray, depth: u32) -> [f64; 3] {
        match self.intersect(ray) {
            Some(hit) => self.shade(&hit, ray, depth),
            None => self.config.background,
        }
    }

    /// Radiance leaving a hit point toward the ray origin.
    pub fn shade(&self, hit: &Hit, ray: &Ray, depth: u32) -> [f64; 3] {
        let surface = &self.surfaces[hit.triangle];
        let material = &self.materials[surface.material];
        let (u, v) = (hit.u, hit.v);
        let [a, b, c] = surface.local;
        let local = a * (1.0 - u - v) + b * u + c * v;
        let albedo = albedo(material.base_color, material.texture.as_ref(), &local);
        if material.unlit {
            return albedo;
        }

        let p = ray.at(hit.t);
        let mut n = surface.normal;
        if n.dot(&ray.direction) > 0.0 {
            n = -n;
        }
        let view = -ray.direction;
        let mut out = [0.0; 3];
        for light in &self.lights {
            let to_light = light.position - p;
            let d2 = to_light.norm_squared();
            let d = d2.sqrt();
            let l = to_light / d;
            let cos = n.dot(&l);
            if cos <= 0.0 {
                continue;
            }
            if self.config.shadows {
                if let Some(bvh) = &self.bvh {
                    if bvh.occluded(&Ray::new(p, l), d) {
                        continue;
                    }
                }
            }
            let spec = if material.specular > 0.0 {
                material.specular * n.dot(&(l + view).normalize()).max(0.0).powi(SHININESS)
            } else {
                0.0
            };
            for k in 0..3 {
                out[k] += (albedo[k] * cos + spec) * light.color[k] * light.intensity / d2;
            }
        }
        if material.reflectivity > 0.0 && depth < self.config.max_reflection_depth {
            let r = ray.direction - n * (2.0 * ray.direction.dot(&n));
            let bounce = self.trace(&Ray::new(p, r.normalize()), depth + 1);
            for k in 0..3 {
                out[k] += material.reflectivity * bounce[k];
            }
        }
        out
    }

    /// Mean linear radiance over the pixel's jittered samples, and the id
    /// under its center.
    pub fn pixel(&self, px: u32, py: u32) -> ([f64; 3], u16) {
        let index = py as u64 * self.config.width as u64 + px as u64;
        let mut rng = SplitMix64::new(self.frame_seed ^ splitmix64(index));
        let spp = self.config.samples_per_pixel;
        let mut sum = [0.0; 3];
        for _ in 0..spp {
            let (sx, sy) = (rng.next_f64(), rng.next_f64());
            let c = self.trace(&self.camera_ray(px as f64 + sx, py as f64 + sy), 0);
            for k in 0..3 {
                sum[k] += c[k];
            }
        }
        let id = self.intersect(&self.center_ray(px, py)).map_or(0, |h| h.instance_id);
        (sum.map(|s| s / spp as f64), id)
    }

    /// Renders on the current rayon pool.
    pub fn render(&self) -> RenderOutput {
        let (w, h) = (self.config.width as usize, self.config.height as usize);
        let mut rgb = vec![0u8; 3 * w * h];
        let mut ids = vec![0u16; w * h];
        rgb.par_chunks_mut(3 * w)
            .zip(ids.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, (row_rgb, row_ids))| {
                for x in 0..w {
                    let (c, id) = self.pixel(x as u32, y as u32);
                    for k in 0..3 {
                        row_rgb[3 * x + k] = tone_map(c[k]);
                    }
                    row_ids[x] = id;
                }
            });
        RenderOutput {
            width: self.config.width,
            height: self.config.height,
            rgb,
            ids,
        }
    }
}

/// Clamp to `[0, 1]`, gamma 2.2, quantize to 8 bits.
pub fn tone_map(c: f64) -> u8 {
    let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
    (c.powf(1.0 / 2.2) * 255.0).round() as u8
}

pub fn render(scene: &SceneSpec, catalog: &PartCatalog, config: &RenderConfig) -> Result<RenderOutput, RenderError> {
    Ok(PreparedScene::new(scene, catalog, config)?.render())
}

/// Renders on a dedicated pool of `workers` threads.
pub fn render_with_workers(
    scene: &SceneSpec,
    catalog: &PartCatalog,
    config: &RenderConfig,
    workers: usize,
) -> Result<RenderOutput, RenderError> {
    if workers == 0 {
        return Err(RenderError::InvalidConfig("worker count must be at least 1"));
    }
    let prepared = PreparedScene::new(scene, catalog, config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|_| RenderError::InvalidConfig("could not start worker pool"))?;
    Ok(pool.install(|| prepared.render()))
}

pub fn write_rgb_png(path: &Path, out: &RenderOutput) -> Result<(), RenderError> {
    let img: ImageBuffer<Rgb<u8>, &[u8]> =
        ImageBuffer::from_raw(out.width, out.height, out.rgb.as_slice()).ok_or(RenderError::InvalidConfig("buffer size"))?;
    img.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Writes the id map as a 16-bit grayscale PNG.
pub fn write_id_png(path: &Path, out: &RenderOutput) -> Result<(), RenderError> {
    let img: ImageBuffer<Luma<u16>, &[u16]> =
        ImageBuffer::from_raw(out.width, out.height, out.ids.as_slice()).ok_or(RenderError::InvalidConfig("buffer size"))?;
    img.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

pub fn read_id_png(path: &Path) -> Result<(u32, u32, Vec<u16>), RenderError> {
    let img = image::open(path)?.into_luma16();
    Ok((img.width(), img.height(), img.into_raw()))
}
