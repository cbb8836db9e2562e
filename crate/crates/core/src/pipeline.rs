//! Frame generation end to end: sample and settle a scene, render it,
//! annotate the id buffer, and write a dataset directory.
//!
//! A dataset directory holds `frame_{index:06}.png`, `frame_{index:06}_ids.png`
//! and `frame_{index:06}.json` per frame, plus `annotations.json` (COCO) and
//! `manifest.jsonl`. A failed run leaves a `.failed` marker and no COCO file.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{annotate_frame, emit_coco, filter_visibility, scaled_min_pixels, AnnotateError, AnnotationSet, ImageInfo};
use crate::catalog::PartCatalog;
use crate::composer::{DatasetManifest, ManifestRecord};
use crate::randomizer::{sample_scene, DatasetVariant, RandomizerError, SceneParams, SceneSpec};
use crate::renderer::{write_id_png, write_rgb_png, PreparedScene, RenderConfig, RenderError, RenderOutput};

pub const COCO_FILE: &str = "annotations.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FAILED_MARKER: &str = ".failed";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] RandomizerError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("frame {index}: {source}")]
    Frame { index: u64, source: Box<PipelineError> },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything `generate` needs besides the catalog and output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub variant: DatasetVariant,
    pub master_seed: u64,
    pub count: u64,
    /// Catalog directory or manifest; the built-in parts when absent.
    pub catalog: Option<PathBuf>,
    pub render: RenderConfig,
    pub scene: SceneParams,
    /// Visibility threshold; scaled from 20 px at 1024x768 when absent.
    pub min_pixels: Option<u64>,
    /// Frame worker threads; all available cores when absent.
    pub workers: Option<usize>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            variant: DatasetVariant::RandTex,
            master_seed: 0,
            count: 10,
            catalog: None,
            render: RenderConfig::default(),
            scene: SceneParams::default(),
            min_pixels: None,
            workers: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.variant == DatasetVariant::FixRefined {
            return Err(RandomizerError::NotGeneratable.into());
        }
        if self.workers == Some(0) {
            return Err(PipelineError::InvalidConfig("workers must be at least 1".into()));
        }
        if self.min_pixels == Some(0) {
            return Err(PipelineError::InvalidConfig("min_pixels must be at least 1".into()));
        }
        self.render.validate()?;
        self.scene.validate()?;
        Ok(())
    }

    pub fn min_pixels(&self) -> u64 {
        self.min_pixels
            .unwrap_or_else(|| scaled_min_pixels(self.render.width, self.render.height))
    }
}

pub fn frame_stem(index: u64) -> String {
    format!("frame_{index:06}")
}

pub struct Frame {
    pub scene: SceneSpec,
    pub image: RenderOutput,
    pub annotations: AnnotationSet,
}

/// Samples, renders and annotates one frame.
pub fn generate_frame(config: &GenerationConfig, catalog: &PartCatalog, index: u64) -> Result<Frame, PipelineError> {
    let scene = sample_scene(config.variant, catalog, config.master_seed, index, &config.scene)?;
    let image = PreparedScene::new(&scene, catalog, &config.render)?.render();
    let info = ImageInfo {
        id: index,
        file_name: format!("{}.png", frame_stem(index)),
        width: image.width,
        height: image.height,
        variant: config.variant,
        frame_seed: scene.frame_seed,
    };
    let annotations = filter_visibility(annotate_frame(&image.ids, &scene, info)?, config.min_pixels());
    Ok(Frame {
        scene,
        image,
        annotations,
    })
}

/// Writes `contents` to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_frame(out_dir: &Path, index: u64, frame: &Frame) -> Result<(), PipelineError> {
    let stem = frame_stem(index);
    write_rgb_png(&out_dir.join(format!("{stem}.png")), &frame.image)?;
    write_id_png(&out_dir.join(format!("{stem}_ids.png")), &frame.image)?;
    let json = serde_json::to_vec(&frame.annotations).expect("annotations serialize");
    let path = out_dir.join(format!("{stem}.json"));
    fs::write(&path, json).map_err(io_err(&path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub frames: u64,
    pub instances: usize,
}

/// Generates `config.count` frames into `out_dir`. Frames run in parallel;
/// the output bytes do not depend on the worker count.
pub fn generate_dataset(
    config: &GenerationConfig,
    catalog: &PartCatalog,
    out_dir: &Path,
    progress: &(dyn Fn(u64) + Sync),
) -> Result<GenerateSummary, PipelineError> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for stale in [FAILED_MARKER, COCO_FILE] {
        let p = out_dir.join(stale);
        if p.exists() {
            fs::remove_file(&p).map_err(io_err(&p))?;
        }
    }
    let result = run_frames(config, catalog, out_dir, progress);
    if let Err(e) = &result {
        let marker = out_dir.join(FAILED_MARKER);
        fs::write(&marker, format!("{e}\n")).map_err(io_err(&marker))?;
    }
    result
}

fn run_frames(
    config: &GenerationConfig,
    catalog: &PartCatalog,
    out_dir: &Path,
    progress: &(dyn Fn(u64) + Sync),
) -> Result<GenerateSummary, PipelineError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| PipelineError::InvalidConfig(format!("worker pool: {e}")))?;
    let sets: Vec<AnnotationSet> = pool.install(|| {
        (0..config.count)
            .into_par_iter()
            .map(|index| {
                let frame = generate_frame(config, catalog, index)
                    .and_then(|f| write_frame(out_dir, index, &f).map(|_| f))
                    .map_err(|e| PipelineError::Frame {
                        index,
                        source: Box::new(e),
                    })?;
                progress(index);
                Ok(frame.annotations)
            })
            .collect::<Result<_, PipelineError>>()
    })?;

    let manifest = DatasetManifest {
        records: (0..config.count)
            .map(|i| ManifestRecord {
                image: format!("{}.png", frame_stem(i)).into(),
                annotation: Some(format!("{}.json", frame_stem(i)).into()),
                variant: config.variant,
            })
            .collect(),
        seed: config.master_seed,
    };
    write_atomic(&out_dir.join(MANIFEST_FILE), manifest.to_jsonl().as_bytes())?;
    let coco = emit_coco(&sets, catalog)?;
    let text = serde_json::to_string(&coco).expect("json value serializes");
    write_atomic(&out_dir.join(COCO_FILE), text.as_bytes())?;
    Ok(GenerateSummary {
        frames: config.count,
        instances: sets.iter().map(|s| s.annotations.len()).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_with_defaults() {
        let cfg: GenerationConfig = serde_json::from_str(r#"{"variant": "FIX", "count": 3}"#).unwrap();
        assert_eq!(cfg.variant, DatasetVariant::Fix);
        assert_eq!(cfg.count, 3);
        assert_eq!(cfg.render, RenderConfig::default());
        assert_eq!(cfg.min_pixels(), 20);
        let refined = GenerationConfig {
            variant: DatasetVariant::FixRefined,
            ..Default::default()
        };
        assert!(refined.validate().is_err());
    }

    #[test]
    fn stems() {
        assert_eq!(frame_stem(7), "frame_000007");
    }
}
