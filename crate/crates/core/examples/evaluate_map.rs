//! Scores noisy predictions against a small COCO ground truth.
//!
//! ```text
//! cargo run --example evaluate_map
//! ```

use synthdet::metrics::{evaluate, iou, parse_detections, GroundTruthSet, DEFAULT_IOU_THRESHOLD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gt = serde_json::json!({
        "images": [{"id": 1}, {"id": 2}],
        "categories": [{"id": 1, "name": "switch"}, {"id": 2, "name": "jack"}],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 30]},
            {"id": 2, "image_id": 1, "category_id": 2, "bbox": [100, 80, 25, 25]},
            {"id": 3, "image_id": 2, "category_id": 1, "bbox": [60, 20, 40, 30]}
        ]
    });
    let preds = serde_json::json!([
        {"image_id": 1, "category_id": 1, "bbox": [12, 11, 40, 30], "score": 0.95},
        {"image_id": 1, "category_id": 2, "bbox": [90, 75, 25, 25], "score": 0.80},
        {"image_id": 2, "category_id": 1, "bbox": [200, 200, 40, 30], "score": 0.70},
        {"image_id": 2, "category_id": 1, "bbox": [61, 22, 38, 30], "score": 0.60}
    ]);
    let gt = GroundTruthSet::from_coco(&gt)?;
    let dets = parse_detections(&preds)?;
    for d in &dets {
        let best = gt
            .objects
            .iter()
            .filter(|g| g.image_id == d.image_id && g.category_id == d.category_id)
            .map(|g| iou(&d.bbox, &g.bbox))
            .fold(0.0, f64::max);
        println!("image {} class {} score {:.2} best IoU {best:.3}", d.image_id, d.category_id, d.score);
    }
    for thr in [DEFAULT_IOU_THRESHOLD, 0.75] {
        let r = evaluate(&gt, &dets, thr)?;
        println!("IoU {thr}: per-class {:?}, mAP {:.4}", r.per_class, r.map);
    }
    Ok(())
}
