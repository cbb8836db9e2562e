//! Command-line front end. Parsing and execution live here so the binary
//! stays a thin wrapper and integration tests can drive the same code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use crate::catalog::{open_catalog, CatalogError, PartCatalog};
use crate::composer::{compose, extract_crops, ComposeError, CropConfig, DatasetManifest, MixSpec};
use crate::gan::{check_coverage, receptive_field, Architecture, RfError};
use crate::metrics::{evaluate, parse_detections, GroundTruthSet, MetricsError, DEFAULT_IOU_THRESHOLD};
use crate::parts::{builtin_catalog, write_builtin_catalog};
use crate::pipeline::{generate_dataset, GenerationConfig, PipelineError};
use crate::randomizer::DatasetVariant;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration; exit status 1.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Rf(#[from] RfError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "synthdet", version, about = "Domain-randomized synthetic detection datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Settle, sample, render and annotate a dataset.
    Generate(GenerateArgs),
    /// Mix datasets by fraction into one manifest.
    Compose(ComposeArgs),
    /// Cut random square crops from every image of a manifest.
    Crops(CropsArgs),
    /// Receptive field and coverage of discriminator stacks.
    AnalyzeRf(AnalyzeRfArgs),
    /// Box mAP of predictions against COCO ground truth.
    Eval(EvalArgs),
    /// Variant histogram of a manifest.
    Stats(StatsArgs),
    /// Write the built-in parts as an OBJ catalog.
    InitCatalog(InitCatalogArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON generation config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// FIX, RAND-NO-TEX or RAND-TEX.
    #[arg(long)]
    pub variant: Option<DatasetVariant>,
    #[arg(long)]
    pub count: Option<u64>,
    /// Master seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Catalog directory or manifest; built-in parts when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub spp: Option<u32>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long)]
    pub no_shadows: bool,
    /// Minimum visible pixels per annotation.
    #[arg(long)]
    pub min_pixels: Option<u64>,
    /// Frame worker threads; never changes output bytes.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suppress per-frame progress.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Mix spec JSON: {total, seed, components: [{manifest, fraction}]}.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CropsArgs {
    /// JSON crop config {size, per_image, seed}; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub size: Option<u32>,
    #[arg(long)]
    pub per_image: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeRfArgs {
    /// JSON config {input: [w, h], extent}; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Layer list or named stacks of {kernel, stride, padding}.
    #[arg(long)]
    pub arch: PathBuf,
    /// Input size as WxH.
    #[arg(long, value_parser = parse_size)]
    pub input: Option<(u64, u64)>,
    /// Object extent in pixels to test for coverage.
    #[arg(long)]
    pub extent: Option<u64>,
    /// COCO file whose largest box side becomes the extent.
    #[arg(long, conflicts_with = "extent")]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON config {iou_threshold}; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub iou: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct InitCatalogArgs {
    #[arg(long)]
    pub out: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Generate(_) => "generate",
            Self::Compose(_) => "compose",
            Self::Crops(_) => "crops",
            Self::AnalyzeRf(_) => "analyze-rf",
            Self::Eval(_) => "eval",
            Self::Stats(_) => "stats",
            Self::InitCatalog(_) => "init-catalog",
        }
    }
}

fn parse_size(s: &str) -> Result<(u64, u64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => read_json(p).map_err(|e| CliError::Usage(format!("config: {e}"))),
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

/// Runs one parsed command, writing its report to `out`.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let report = match &cli.command {
        Command::Generate(a) => cmd_generate(a)?,
        Command::Compose(a) => cmd_compose(a)?,
        Command::Crops(a) => cmd_crops(a)?,
        Command::AnalyzeRf(a) => cmd_analyze_rf(a)?,
        Command::Eval(a) => cmd_eval(a)?,
        Command::Stats(a) => cmd_stats(a)?,
        Command::InitCatalog(a) => cmd_init_catalog(a)?,
    };
    out.write_all(report.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// File config merged with flags, paths checked, catalog loaded.
pub fn resolve_generate(a: &GenerateArgs) -> Result<(GenerationConfig, PartCatalog), CliError> {
    let mut cfg: GenerationConfig = read_config(a.config.as_deref())?;
    if let (Some(file), Some(cat)) = (&a.config, &cfg.catalog) {
        cfg.catalog = Some(file.parent().unwrap_or(Path::new("")).join(cat));
    }
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(v) = a.count {
        cfg.count = v;
    }
    if let Some(v) = a.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = &a.catalog {
        cfg.catalog = Some(v.clone());
    }
    if let Some(v) = a.width {
        cfg.render.width = v;
    }
    if let Some(v) = a.height {
        cfg.render.height = v;
    }
    if let Some(v) = a.spp {
        cfg.render.samples_per_pixel = v;
    }
    if let Some(v) = a.max_depth {
        cfg.render.max_reflection_depth = v;
    }
    if a.no_shadows {
        cfg.render.shadows = false;
    }
    if a.min_pixels.is_some() {
        cfg.min_pixels = a.min_pixels;
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let catalog = match &cfg.catalog {
        Some(p) => open_catalog(p)?,
        None => builtin_catalog(),
    };
    Ok((cfg, catalog))
}

fn cmd_generate(a: &GenerateArgs) -> Result<String, CliError> {
    let (cfg, catalog) = resolve_generate(a)?;
    let total = cfg.count;
    let done = std::sync::atomic::AtomicU64::new(0);
    let quiet = a.quiet;
    let progress = |index: u64| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if !quiet {
            eprintln!("frame {index:06} done ({n}/{total})");
        }
    };
    let summary = generate_dataset(&cfg, &catalog, &a.out, &progress)?;
    Ok(format!(
        "generated {} {} frames with {} instances into {}\n",
        summary.frames,
        cfg.variant,
        summary.instances,
        a.out.display()
    ))
}

fn cmd_compose(a: &ComposeArgs) -> Result<String, CliError> {
    require_file(&a.spec)?;
    let spec = MixSpec::read(&a.spec)?;
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let manifest = compose(&spec)?;
    manifest.write(&a.out)?;
    let mut s = format!("wrote {} records to {}\n", manifest.len(), a.out.display());
    s.push_str(&histogram(&manifest));
    Ok(s)
}

fn cmd_crops(a: &CropsArgs) -> Result<String, CliError> {
    let mut cfg: CropConfig = read_config(a.config.as_deref())?;
    if let Some(v) = a.size {
        cfg.size = v;
    }
    if let Some(v) = a.per_image {
        cfg.per_image = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if cfg.size == 0 {
        return Err(CliError::Usage("crop size must be at least 1".into()));
    }
    require_file(&a.manifest)?;
    let manifest = DatasetManifest::read(&a.manifest)?;
    let crops = extract_crops(&manifest, &cfg, &a.out)?;
    Ok(format!(
        "wrote {} crops of {}x{} from {} images into {}\n",
        crops.len(),
        cfg.size,
        cfg.size,
        manifest.len(),
        a.out.display()
    ))
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RfConfig {
    input: (u64, u64),
    extent: Option<u64>,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            input: (256, 256),
            extent: None,
        }
    }
}

/// Largest box side over every annotation of a COCO document.
pub fn largest_box_side(coco: &serde_json::Value) -> Result<u64, CliError> {
    let malformed = |m: &str| CliError::Metrics(MetricsError::Malformed(m.into()));
    let anns = coco
        .get("annotations")
        .and_then(|a| a.as_array())
        .ok_or_else(|| malformed("missing annotations list"))?;
    let mut side = 0.0f64;
    for a in anns {
        let b = a
            .get("bbox")
            .and_then(|b| b.as_array())
            .ok_or_else(|| malformed("annotation without bbox"))?;
        for c in b.iter().skip(2) {
            side = side.max(c.as_f64().ok_or_else(|| malformed("non-numeric bbox"))?);
        }
    }
    Ok(side.ceil() as u64)
}

fn cmd_analyze_rf(a: &AnalyzeRfArgs) -> Result<String, CliError> {
    let mut cfg: RfConfig = read_config(a.config.as_deref())?;
    if let Some(v) = a.input {
        cfg.input = v;
    }
    if a.extent.is_some() {
        cfg.extent = a.extent;
    }
    if let Some(ds) = &a.dataset {
        require_file(ds)?;
        cfg.extent = Some(largest_box_side(&read_json(ds)?)?);
    }
    require_file(&a.arch)?;
    let arch = Architecture::parse(&read_text(&a.arch)?)?;
    let mut s = String::new();
    for (name, layers) in arch.stacks() {
        let report = receptive_field(layers, cfg.input)?;
        let _ = writeln!(s, "{name} ({}x{} input)", cfg.input.0, cfg.input.1);
        s.push_str(&report.table());
        if let Some(extent) = cfg.extent {
            let c = check_coverage(&report, extent);
            let verdict = if c.covered { "COVERED" } else { "NOT COVERED" };
            let _ = writeln!(s, "extent {extent} px: {verdict} (margin {} px)", c.margin);
        }
    }
    Ok(s)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalConfig {
    iou_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let mut cfg: EvalConfig = read_config(a.config.as_deref())?;
    if let Some(v) = a.iou {
        cfg.iou_threshold = v;
    }
    if !(cfg.iou_threshold > 0.0 && cfg.iou_threshold <= 1.0) {
        return Err(CliError::Usage("IoU threshold must lie in (0, 1]".into()));
    }
    require_file(&a.gt)?;
    require_file(&a.pred)?;
    let gt = GroundTruthSet::from_coco(&read_json(&a.gt)?)?;
    let dets = parse_detections(&read_json(&a.pred)?)?;
    let result = evaluate(&gt, &dets, cfg.iou_threshold)?;
    let mut s = String::new();
    for (class, ap) in &result.per_class {
        let _ = writeln!(s, "class {class} AP {ap:.4}");
    }
    let _ = writeln!(s, "mAP@{} {:.4}", cfg.iou_threshold, result.map);
    Ok(s)
}

fn histogram(manifest: &DatasetManifest) -> String {
    let mut counts: BTreeMap<DatasetVariant, usize> = DatasetVariant::ALL.iter().map(|v| (*v, 0)).collect();
    for r in &manifest.records {
        *counts.entry(r.variant).or_default() += 1;
    }
    let mut s = String::new();
    for (v, n) in counts {
        let _ = writeln!(s, "{v} {n}");
    }
    s
}

fn cmd_stats(a: &StatsArgs) -> Result<String, CliError> {
    require_file(&a.manifest)?;
    let manifest = DatasetManifest::read(&a.manifest)?;
    let mut s = histogram(&manifest);
    let _ = writeln!(s, "total {}", manifest.len());
    Ok(s)
}

fn cmd_init_catalog(a: &InitCatalogArgs) -> Result<String, CliError> {
    let path = write_builtin_catalog(&a.out).map_err(|source| CliError::Io {
        path: a.out.clone(),
        source,
    })?;
    Ok(format!("wrote {}\n", path.display()))
}
