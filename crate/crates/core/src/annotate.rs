//! Instance masks, tight boxes and COCO-style documents from id buffers.
//!
//! Masks are stored as column-major run-length counts that start with a
//! background run, the uncompressed COCO convention.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::catalog::PartCatalog;
use crate::randomizer::{DatasetVariant, SceneSpec};

/// Visibility threshold at the reference resolution of 1024x768.
pub const DEFAULT_MIN_PIXELS: u64 = 20;
const REFERENCE_PIXELS: u64 = 1024 * 768;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotateError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("run lengths sum to {actual}, expected {expected}")]
    BadRuns { expected: u64, actual: u64 },
    #[error("buffer holds {actual} pixels, expected {expected}")]
    BadDims { expected: usize, actual: usize },
    #[error("duplicate image id {0}")]
    DuplicateImage(u64),
    #[error("instance {0} is not in the scene")]
    UnknownInstance(u16),
    #[error("class id {0} is not in the catalog")]
    UnknownClass(u16),
}

/// Tight pixel box; `(x, y)` is the top-left pixel, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<[u32; 4]> for BBox {
    fn from([x, y, w, h]: [u32; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.w && y < self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMask {
    pub instance_id: u16,
    pub width: u32,
    pub height: u32,
    pub rle: Vec<u32>,
}

impl InstanceMask {
    pub fn area(&self) -> u64 {
        self.rle.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    /// Row-major bitmap.
    pub fn decode(&self) -> Result<Vec<bool>, AnnotateError> {
        decode_rle(&self.rle, self.width, self.height)
    }

    /// Column-major `[start, end)` index ranges of foreground runs.
    fn runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.rle.iter().enumerate().filter_map(move |(k, &c)| {
            let start = pos;
            pos += c as u64;
            (k % 2 == 1 && c > 0).then_some((start, pos))
        })
    }
}

/// Column-major run lengths of a row-major bitmap, leading with the
/// (possibly empty) background run.
pub fn encode_rle(bitmap: &[bool], width: u32, height: u32) -> Vec<u32> {
    let (w, h) = (width as usize, height as usize);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = bitmap[y * w + x];
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

pub fn decode_rle(counts: &[u32], width: u32, height: u32) -> Result<Vec<bool>, AnnotateError> {
    let (w, h) = (width as usize, height as usize);
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total != (w * h) as u64 {
        return Err(AnnotateError::BadRuns {
            expected: (w * h) as u64,
            actual: total,
        });
    }
    let mut out = vec![false; w * h];
    let mut pos = 0usize;
    for (k, &c) in counts.iter().enumerate() {
        if k % 2 == 1 {
            for i in pos..pos + c as usize {
                out[(i % h) * w + i / h] = true;
            }
        }
        pos += c as usize;
    }
    Ok(out)
}

/// One mask per distinct nonzero id, in increasing id order.
pub fn masks_from_ids(ids: &[u16], width: u32, height: u32) -> Result<Vec<InstanceMask>, AnnotateError> {
    let (w, h) = (width as usize, height as usize);
    if ids.len() != w * h {
        return Err(AnnotateError::BadDims {
            expected: w * h,
            actual: ids.len(),
        });
    }
    // Per id: run counts so far and the column-major end of its last run.
    let mut building: BTreeMap<u16, (Vec<u32>, u32)> = BTreeMap::new();
    let mut k = 0u32;
    for x in 0..w {
        for y in 0..h {
            let id = ids[y * w + x];
            if id != 0 {
                let (counts, end) = building.entry(id).or_insert_with(|| (Vec::new(), 0));
                if *end == k && !counts.is_empty() {
                    *counts.last_mut().expect("non-empty") += 1;
                } else {
                    counts.push(k - *end);
                    counts.push(1);
                }
                *end = k + 1;
            }
            k += 1;
        }
    }
    Ok(building
        .into_iter()
        .map(|(instance_id, (mut counts, end))| {
            if end < k {
                counts.push(k - end);
            }
            InstanceMask {
                instance_id,
                width,
                height,
                rle: counts,
            }
        })
        .collect())
}

pub fn bbox_from_mask(mask: &InstanceMask) -> Result<BBox, AnnotateError> {
    let h = mask.height as u64;
    let (mut x0, mut y0, mut x1, mut y1) = (u64::MAX, u64::MAX, 0u64, 0u64);
    for (start, end) in mask.runs() {
        let (c0, c1) = (start / h, (end - 1) / h);
        let (r0, r1) = if c0 == c1 { (start % h, (end - 1) % h) } else { (0, h - 1) };
        x0 = x0.min(c0);
        x1 = x1.max(c1);
        y0 = y0.min(r0);
        y1 = y1.max(r1);
    }
    if x0 == u64::MAX {
        return Err(AnnotateError::EmptyMask);
    }
    Ok(BBox {
        x: x0 as u32,
        y: y0 as u32,
        w: (x1 - x0 + 1) as u32,
        h: (y1 - y0 + 1) as u32,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub variant: DatasetVariant,
    pub frame_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub class_id: u16,
    pub bbox: BBox,
    pub mask: InstanceMask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub image: ImageInfo,
    pub annotations: Vec<Annotation>,
}

/// Annotations for every instance visible in a rendered id buffer.
pub fn annotate_frame(ids: &[u16], scene: &SceneSpec, image: ImageInfo) -> Result<AnnotationSet, AnnotateError> {
    let classes: BTreeMap<u16, u16> = scene.instances.iter().map(|i| (i.instance_id, i.class_id)).collect();
    let annotations = masks_from_ids(ids, image.width, image.height)?
        .into_iter()
        .map(|mask| {
            let class_id = *classes
                .get(&mask.instance_id)
                .ok_or(AnnotateError::UnknownInstance(mask.instance_id))?;
            Ok(Annotation {
                class_id,
                bbox: bbox_from_mask(&mask)?,
                mask,
            })
        })
        .collect::<Result<_, AnnotateError>>()?;
    Ok(AnnotationSet { image, annotations })
}

/// The default visibility threshold scaled to an image's pixel count.
pub fn scaled_min_pixels(width: u32, height: u32) -> u64 {
    let px = width as u64 * height as u64;
    ((DEFAULT_MIN_PIXELS * px + REFERENCE_PIXELS / 2) / REFERENCE_PIXELS).max(1)
}

/// Drops instances whose mask covers fewer than `min_pixels` pixels.
pub fn filter_visibility(mut set: AnnotationSet, min_pixels: u64) -> AnnotationSet {
    set.annotations.retain(|a| a.mask.area() >= min_pixels);
    set
}

/// COCO-style document. Keys serialize in sorted order, so equal input
/// yields byte-identical output.
pub fn emit_coco(sets: &[AnnotationSet], catalog: &PartCatalog) -> Result<Value, AnnotateError> {
    let known: BTreeSet<u16> = catalog.classes.iter().map(|c| c.class_id).collect();
    let mut seen = BTreeSet::new();
    let mut images = Vec::with_capacity(sets.len());
    let mut annotations = Vec::new();
    for set in sets {
        let img = &set.image;
        if !seen.insert(img.id) {
            return Err(AnnotateError::DuplicateImage(img.id));
        }
        images.push(json!({
            "id": img.id,
            "file_name": img.file_name,
            "width": img.width,
            "height": img.height,
            "variant": img.variant,
            "frame_seed": img.frame_seed,
        }));
        for a in &set.annotations {
            if !known.contains(&a.class_id) {
                return Err(AnnotateError::UnknownClass(a.class_id));
            }
            annotations.push(json!({
                "id": annotations.len() + 1,
                "image_id": img.id,
                "category_id": a.class_id,
                "instance_id": a.mask.instance_id,
                "bbox": a.bbox,
                "area": a.mask.area(),
                "iscrowd": 0,
                "segmentation": {"counts": a.mask.rle, "size": [a.mask.height, a.mask.width]},
            }));
        }
    }
    let categories: Vec<Value> = catalog
        .classes
        .iter()
        .map(|c| json!({"id": c.class_id, "name": c.name, "supercategory": "part"}))
        .collect();
    Ok(json!({
        "images": images,
        "annotations": annotations,
        "categories": categories,
    }))
}
