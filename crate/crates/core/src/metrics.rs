//! Box-level detection mAP at a fixed IoU threshold.
//!
//! Detections are matched greedily by descending score within each
//! (image, class) group. AP is the area under the all-point interpolated
//! precision-recall curve; detections with equal scores enter the curve
//! together, so input order never matters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("prediction for unknown class id {0}")]
    UnknownClass(u16),
    #[error("prediction for image id {0}, which has no ground truth entry")]
    UnknownImage(u64),
    #[error("non-finite score or box")]
    NonFinite,
}

/// `[x, y, w, h]` with the top-left corner at `(x, y)`.
pub type Box2 = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u16,
    pub bbox: Box2,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: u64,
    pub category_id: u16,
    pub bbox: Box2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub per_class: BTreeMap<u16, f64>,
    pub map: f64,
    pub iou_threshold: f64,
}

pub fn iou(a: &Box2, b: &Box2) -> f64 {
    let iw = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let ih = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Descending score, lower index first on ties.
fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// TP/FP label for each detection, in input order. Each detection, taken
/// by descending score, claims the unmatched ground truth of highest IoU at
/// or above `threshold` (lower index on ties).
pub fn match_detections(dets: &[(Box2, f64)], gts: &[Box2], threshold: f64) -> Vec<bool> {
    let scores: Vec<f64> = dets.iter().map(|d| d.1).collect();
    let mut taken = vec![false; gts.len()];
    let mut labels = vec![false; dets.len()];
    for i in score_order(&scores) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let o = iou(&dets[i].0, gt);
            if o >= threshold && best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            labels[i] = true;
        }
    }
    labels
}

/// All-point interpolated AP of `(score, is_tp)` pairs against `gt_count`
/// ground-truth objects.
pub fn average_precision(scored: &[(f64, bool)], gt_count: usize) -> f64 {
    if gt_count == 0 {
        return 0.0;
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let order = score_order(&scores);
    // (recall, precision) after each distinct score level.
    let mut curve = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let level = scores[order[k]];
        while k < order.len() && scores[order[k]] == level {
            tp += scored[order[k]].1 as usize;
            seen += 1;
            k += 1;
        }
        curve.push((tp as f64 / gt_count as f64, tp as f64 / seen as f64));
    }
    // Interpolated precision: the best precision at this recall or beyond.
    let mut envelope = vec![0.0; curve.len()];
    let mut best = 0.0f64;
    for i in (0..curve.len()).rev() {
        best = best.max(curve[i].1);
        envelope[i] = best;
    }
    let mut ap = 0.0;
    let mut last = 0.0;
    for (i, &(recall, _)) in curve.iter().enumerate() {
        ap += (recall - last) * envelope[i];
        last = recall;
    }
    ap
}

/// Ground truth parsed from a COCO-style document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSet {
    pub image_ids: BTreeSet<u64>,
    pub categories: BTreeSet<u16>,
    pub objects: Vec<GroundTruth>,
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, MetricsError> {
    v.get(key).ok_or_else(|| MetricsError::Malformed(format!("missing {key:?}")))
}

fn as_u64(v: &Value, key: &str) -> Result<u64, MetricsError> {
    field(v, key)?
        .as_u64()
        .ok_or_else(|| MetricsError::Malformed(format!("{key:?} is not a non-negative integer")))
}

fn as_class(v: &Value, key: &str) -> Result<u16, MetricsError> {
    u16::try_from(as_u64(v, key)?).map_err(|_| MetricsError::Malformed(format!("{key:?} out of range")))
}

fn as_box(v: &Value) -> Result<Box2, MetricsError> {
    let arr: Vec<f64> = serde_json::from_value(field(v, "bbox")?.clone())
        .map_err(|e| MetricsError::Malformed(format!("bbox: {e}")))?;
    let b: Box2 = arr
        .try_into()
        .map_err(|_| MetricsError::Malformed("bbox must have four numbers".into()))?;
    if b.iter().any(|c| !c.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    Ok(b)
}

fn list<'a>(doc: &'a Value, key: &str) -> Result<&'a Vec<Value>, MetricsError> {
    field(doc, key)?
        .as_array()
        .ok_or_else(|| MetricsError::Malformed(format!("{key:?} is not a list")))
}

impl GroundTruthSet {
    pub fn from_coco(doc: &Value) -> Result<Self, MetricsError> {
        let mut set = GroundTruthSet::default();
        for img in list(doc, "images")? {
            set.image_ids.insert(as_u64(img, "id")?);
        }
        for c in list(doc, "categories")? {
            set.categories.insert(as_class(c, "id")?);
        }
        for a in list(doc, "annotations")? {
            set.objects.push(GroundTruth {
                image_id: as_u64(a, "image_id")?,
                category_id: as_class(a, "category_id")?,
                bbox: as_box(a)?,
            });
        }
        Ok(set)
    }
}

/// Predictions file: a JSON list of `{image_id, category_id, bbox, score}`.
pub fn parse_detections(doc: &Value) -> Result<Vec<Detection>, MetricsError> {
    let items = doc
        .as_array()
        .ok_or_else(|| MetricsError::Malformed("predictions must be a list".into()))?;
    items
        .iter()
        .map(|d| {
            let score = field(d, "score")?
                .as_f64()
                .ok_or_else(|| MetricsError::Malformed("\"score\" is not a number".into()))?;
            Ok(Detection {
                image_id: as_u64(d, "image_id")?,
                category_id: as_class(d, "category_id")?,
                bbox: as_box(d)?,
                score,
            })
        })
        .collect()
}

/// Per-class AP over all images jointly; mAP averages the classes that
/// have ground truth.
pub fn evaluate(gt: &GroundTruthSet, dets: &[Detection], threshold: f64) -> Result<EvalResult, MetricsError> {
    for d in dets {
        if !d.score.is_finite() || d.bbox.iter().any(|c| !c.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        if !gt.categories.contains(&d.category_id) {
            return Err(MetricsError::UnknownClass(d.category_id));
        }
        if !gt.image_ids.contains(&d.image_id) {
            return Err(MetricsError::UnknownImage(d.image_id));
        }
    }
    let mut groups: BTreeMap<(u16, u64), (Vec<Box2>, Vec<(Box2, f64)>)> = BTreeMap::new();
    for g in &gt.objects {
        groups.entry((g.category_id, g.image_id)).or_default().0.push(g.bbox);
    }
    for d in dets {
        groups.entry((d.category_id, d.image_id)).or_default().1.push((d.bbox, d.score));
    }
    let mut per_class_scored: BTreeMap<u16, (Vec<(f64, bool)>, usize)> = BTreeMap::new();
    for ((class, _), (gts, ds)) in &groups {
        let labels = match_detections(ds, gts, threshold);
        let entry = per_class_scored.entry(*class).or_default();
        entry.0.extend(ds.iter().zip(labels).map(|(d, tp)| (d.1, tp)));
        entry.1 += gts.len();
    }
    let per_class: BTreeMap<u16, f64> = per_class_scored
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(c, (scored, n))| (c, average_precision(&scored, n)))
        .collect();
    let map = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    Ok(EvalResult {
        per_class,
        map,
        iou_threshold: threshold,
    })
}
