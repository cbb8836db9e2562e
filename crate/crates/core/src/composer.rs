//! Dataset manifests: mixing sources at fixed ratios, ingesting externally
//! refined images, train/val splits and random crops.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::randomizer::DatasetVariant;
use crate::seed::derive_frame_seed;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}, line {line}: {message}")]
    BadRecord { path: PathBuf, line: usize, message: String },
    #[error("invalid mix spec: {0}")]
    InvalidSpec(String),
    #[error("component {component} needs {needed} records but has {available}")]
    InsufficientSource { component: String, needed: usize, available: usize },
    #[error("image {stem}.png has no matching annotation {stem}.json")]
    MissingAnnotation { stem: String },
    #[error("{path}: image is {width}x{height}, smaller than crop size {size}")]
    ImageTooSmall { path: PathBuf, width: u32, height: u32, size: u32 },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("invalid crop config: {0}")]
    InvalidCrop(&'static str),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ComposeError + '_ {
    move |source| ComposeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image: PathBuf,
    pub annotation: Option<PathBuf>,
    pub variant: DatasetVariant,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ComposeError> {
        fs::write(path, self.to_jsonl()).map_err(io_err(path))
    }

    /// Reads a JSON-lines manifest. Relative paths are resolved against the
    /// manifest's directory.
    pub fn read(path: &Path) -> Result<Self, ComposeError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut r: ManifestRecord = serde_json::from_str(line).map_err(|e| ComposeError::BadRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            r.image = base.join(&r.image);
            r.annotation = r.annotation.map(|a| base.join(a));
            records.push(r);
        }
        Ok(Self { records, seed: 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixComponent {
    pub manifest: PathBuf,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub total: usize,
    #[serde(default)]
    pub seed: u64,
    pub components: Vec<MixComponent>,
}

impl MixSpec {
    pub fn read(path: &Path) -> Result<Self, ComposeError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut spec: MixSpec =
            serde_json::from_str(&text).map_err(|e| ComposeError::InvalidSpec(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in &mut spec.components {
            c.manifest = base.join(&c.manifest);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        if self.total == 0 {
            return Err(ComposeError::InvalidSpec("total must be at least 1".into()));
        }
        if self.components.is_empty() {
            return Err(ComposeError::InvalidSpec("no components".into()));
        }
        let fractions: Vec<f64> = self.components.iter().map(|c| c.fraction).collect();
        check_fractions(&fractions)
    }
}

fn check_fractions(fractions: &[f64]) -> Result<(), ComposeError> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(ComposeError::InvalidSpec(format!("fraction {f} outside [0, 1]")));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ComposeError::InvalidSpec(format!("fractions sum to {sum}, not 1")));
    }
    Ok(())
}

/// Rounds `fraction * total` down, then hands the leftover units to the
/// largest remainders (lower index first on ties). Counts sum to `total`.
pub fn largest_remainder(fractions: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut by_remainder: Vec<usize> = (0..fractions.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws each source's share without replacement, then shuffles the union.
pub fn compose_manifests(
    sources: &[(String, &DatasetManifest, f64)],
    total: usize,
    seed: u64,
) -> Result<DatasetManifest, ComposeError> {
    let fractions: Vec<f64> = sources.iter().map(|s| s.2).collect();
    check_fractions(&fractions)?;
    let counts = largest_remainder(&fractions, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(total);
    for ((name, manifest, _), &n) in sources.iter().zip(&counts) {
        if manifest.len() < n {
            return Err(ComposeError::InsufficientSource {
                component: name.clone(),
                needed: n,
                available: manifest.len(),
            });
        }
        for i in index::sample(&mut rng, manifest.len(), n) {
            records.push(manifest.records[i].clone());
        }
    }
    records.shuffle(&mut rng);
    Ok(DatasetManifest { records, seed })
}

pub fn compose(spec: &MixSpec) -> Result<DatasetManifest, ComposeError> {
    spec.validate()?;
    let loaded = spec
        .components
        .iter()
        .map(|c| DatasetManifest::read(&c.manifest))
        .collect::<Result<Vec<_>, _>>()?;
    let sources: Vec<(String, &DatasetManifest, f64)> = spec
        .components
        .iter()
        .zip(&loaded)
        .map(|(c, m)| (c.manifest.display().to_string(), m, c.fraction))
        .collect();
    compose_manifests(&sources, spec.total, spec.seed)
}

/// Pairs every `<stem>.png` in `dir` (id maps excluded) with `<stem>.json`.
pub fn ingest_external(dir: &Path, variant: DatasetVariant) -> Result<DatasetManifest, ComposeError> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if !stem.ends_with("_ids") {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    let mut records = Vec::with_capacity(stems.len());
    for stem in stems {
        let annotation = dir.join(format!("{stem}.json"));
        if !annotation.is_file() {
            return Err(ComposeError::MissingAnnotation { stem });
        }
        records.push(ManifestRecord {
            image: dir.join(format!("{stem}.png")),
            annotation: Some(annotation),
            variant,
        });
    }
    Ok(DatasetManifest { records, seed: 0 })
}

/// Seeded disjoint partition; `fractions` are (train, val).
pub fn split(manifest: &DatasetManifest, fractions: (f64, f64), seed: u64) -> Result<(DatasetManifest, DatasetManifest), ComposeError> {
    let (train, val) = fractions;
    if train < 0.0 || val < 0.0 {
        return Err(ComposeError::InvalidSpec("split fractions must be non-negative".into()));
    }
    check_fractions(&[train, val])?;
    let n_train = largest_remainder(&[train, val], manifest.len())[0];
    let mut order: Vec<usize> = (0..manifest.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| DatasetManifest {
        records: idx.iter().map(|&i| manifest.records[i].clone()).collect(),
        seed,
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    pub size: u32,
    pub per_image: u32,
    pub seed: u64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            size: 256,
            per_image: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crop {
    pub source: PathBuf,
    pub ox: u32,
    pub oy: u32,
    pub size: u32,
    pub path: PathBuf,
}

/// Crop offsets for the `image_index`-th image of a manifest.
pub fn crop_offsets(width: u32, height: u32, config: &CropConfig, image_index: u64) -> Vec<(u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_frame_seed(config.seed, image_index));
    (0..config.per_image)
        .map(|_| {
            (
                rng.gen_range(0..=width - config.size),
                rng.gen_range(0..=height - config.size),
            )
        })
        .collect()
}

/// Writes `{stem}_{ox}_{oy}.png` crops of every manifest image into `out_dir`.
pub fn extract_crops(manifest: &DatasetManifest, config: &CropConfig, out_dir: &Path) -> Result<Vec<Crop>, ComposeError> {
    if config.size == 0 {
        return Err(ComposeError::InvalidCrop("size must be at least 1"));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let per_image: Vec<Vec<Crop>> = manifest
        .records
        .par_iter()
        .enumerate()
        .map(|(i, record)| {
            let path = &record.image;
            let img = image::open(path)
                .map_err(|source| ComposeError::Image {
                    path: path.clone(),
                    source,
                })?
                .into_rgb8();
            let (w, h) = img.dimensions();
            if w < config.size || h < config.size {
                return Err(ComposeError::ImageTooSmall {
                    path: path.clone(),
                    width: w,
                    height: h,
                    size: config.size,
                });
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            crop_offsets(w, h, config, i as u64)
                .into_iter()
                .map(|(ox, oy)| {
                    let out = out_dir.join(format!("{stem}_{ox}_{oy}.png"));
                    let window = image::imageops::crop_imm(&img, ox, oy, config.size, config.size).to_image();
                    window.save(&out).map_err(|source| ComposeError::Image {
                        path: out.clone(),
                        source,
                    })?;
                    Ok(Crop {
                        source: path.clone(),
                        ox,
                        oy,
                        size: config.size,
                        path: out,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_image.into_iter().flatten().collect())
}
