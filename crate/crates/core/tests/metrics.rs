mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthdet::metrics::{
    average_precision, evaluate, iou, match_detections, parse_detections, Box2, Detection, GroundTruthSet,
    MetricsError,
};

use common::map_fixture;

fn fixture() -> (GroundTruthSet, Vec<Detection>) {
    let (gt, preds) = map_fixture();
    (GroundTruthSet::from_coco(&gt).unwrap(), parse_detections(&preds).unwrap())
}

#[test]
fn fixture_values() {
    let (gt, dets) = fixture();
    let r = evaluate(&gt, &dets, 0.5).unwrap();
    assert!((r.per_class[&1] - 5.0 / 6.0).abs() < 1e-9);
    assert!((r.per_class[&2] - 1.0).abs() < 1e-9);
    assert!(!r.per_class.contains_key(&3), "classes without ground truth are excluded");
    assert!((r.map - 11.0 / 12.0).abs() < 1e-9);
}

#[test]
fn perfect_and_empty_predictions() {
    let (gt, _) = fixture();
    let perfect: Vec<Detection> = gt
        .objects
        .iter()
        .map(|g| Detection {
            image_id: g.image_id,
            category_id: g.category_id,
            bbox: g.bbox,
            score: 1.0,
        })
        .collect();
    assert_eq!(evaluate(&gt, &perfect, 0.5).unwrap().map, 1.0);
    assert_eq!(evaluate(&gt, &[], 0.5).unwrap().map, 0.0);
}

#[test]
fn invalid_predictions() {
    let (gt, dets) = fixture();
    let mut bad = dets.clone();
    bad[0].category_id = 9;
    assert_eq!(evaluate(&gt, &bad, 0.5), Err(MetricsError::UnknownClass(9)));
    let mut bad = dets;
    bad[0].image_id = 77;
    assert_eq!(evaluate(&gt, &bad, 0.5), Err(MetricsError::UnknownImage(77)));
    assert!(parse_detections(&serde_json::json!({"not": "a list"})).is_err());
}

#[test]
fn invariances() {
    let (gt, dets) = fixture();
    let base = evaluate(&gt, &dets, 0.5).unwrap().map;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let mut shuffled = dets.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(evaluate(&gt, &shuffled, 0.5).unwrap().map, base);
        let k: f64 = rng.gen_range(0.01..0.99);
        let scaled: Vec<Detection> = dets.iter().map(|d| Detection { score: d.score * k, ..*d }).collect();
        assert!((evaluate(&gt, &scaled, 0.5).unwrap().map - base).abs() < 1e-15);
    }
    let relabel = |id: u64| 1000 - id;
    let mut gt2 = gt.clone();
    gt2.image_ids = gt.image_ids.iter().map(|&i| relabel(i)).collect();
    for g in &mut gt2.objects {
        g.image_id = relabel(g.image_id);
    }
    let dets2: Vec<Detection> = dets.iter().map(|d| Detection { image_id: relabel(d.image_id), ..*d }).collect();
    assert_eq!(evaluate(&gt2, &dets2, 0.5).unwrap().map, base);
}

#[test]
fn appending_at_the_bottom_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..500 {
        let n = rng.gen_range(0..12);
        let gt_count = rng.gen_range(1..8);
        let mut scored: Vec<(f64, bool)> = (0..n).map(|_| (rng.gen_range(0.1..1.0), rng.gen_bool(0.5))).collect();
        let tp = scored.iter().filter(|s| s.1).count();
        if tp >= gt_count {
            scored.retain(|s| !s.1);
        }
        let ap = average_precision(&scored, gt_count);
        let mut with_tp = scored.clone();
        with_tp.push((0.05, true));
        assert!(average_precision(&with_tp, gt_count) >= ap - 1e-15);
        let mut with_fp = scored.clone();
        with_fp.push((0.05, false));
        assert!(average_precision(&with_fp, gt_count) <= ap + 1e-15);
    }
}

/// Greedy matching written as a scan over (score, index)-ordered detections
/// and IoU-ranked candidates.
fn greedy_oracle(dets: &[(Box2, f64)], gts: &[Box2], threshold: f64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| dets[b].1.partial_cmp(&dets[a].1).unwrap().then(a.cmp(&b)));
    let mut free = vec![true; gts.len()];
    let mut out = vec![false; dets.len()];
    for i in idx {
        let mut cands: Vec<(f64, usize)> = (0..gts.len())
            .filter(|&g| free[g])
            .map(|g| (iou(&dets[i].0, &gts[g]), g))
            .filter(|c| c.0 >= threshold)
            .collect();
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        if let Some(&(_, g)) = cands.first() {
            free[g] = false;
            out[i] = true;
        }
    }
    out
}

#[test]
fn matching_agrees_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rand_box = |rng: &mut ChaCha8Rng| -> Box2 {
        [rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64, rng.gen_range(1..5) as f64, rng.gen_range(1..5) as f64]
    };
    for _ in 0..2000 {
        let gts: Vec<Box2> = (0..rng.gen_range(0..5)).map(|_| rand_box(&mut rng)).collect();
        let dets: Vec<(Box2, f64)> = (0..rng.gen_range(0..6))
            .map(|_| (rand_box(&mut rng), rng.gen_range(0..4) as f64 / 4.0))
            .collect();
        assert_eq!(match_detections(&dets, &gts, 0.5), greedy_oracle(&dets, &gts, 0.5));
    }
}
