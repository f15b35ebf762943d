//! Map-level evaluation: per-class IoU, mIoU and voxel accuracy of a
//! predicted labeling against ground truth, plus multi-strategy comparison
//! rows.

use std::collections::HashMap;

use crate::types::VoxelKey;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("reports disagree on the label set ({0} vs {1} classes)")]
    LabelSetMismatch(usize, usize),
}

/// Evaluation result.
///
/// `per_class_iou[c]` is `None` when class c appears in neither prediction
/// nor ground truth; such classes are excluded from the mIoU mean. The
/// confusion matrix covers voxels present in both maps (row = GT class,
/// column = predicted class); accuracy divides its trace by the total GT
/// voxel count, so GT voxels missing from the prediction count against it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub num_classes: usize,
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub accuracy: f64,
    /// Row-major K×K counts over matched voxels.
    pub confusion: Vec<u64>,
    pub gt_voxels: u64,
    pub pred_voxels: u64,
    pub matched_voxels: u64,
}

/// Per-class IoU = TP / (TP + FP + FN) over the union of keyed voxels.
/// GT voxels missing from the prediction are false negatives for their class;
/// predicted voxels absent from GT are false positives.
pub fn evaluate(
    num_classes: usize,
    pred: &[(VoxelKey, usize)],
    gt: &[(VoxelKey, usize)],
) -> Result<EvalReport, MetricsError> {
    if gt.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let check = |label: usize| {
        if label >= num_classes {
            Err(MetricsError::LabelOutOfRange { label, num_classes })
        } else {
            Ok(())
        }
    };
    let mut gt_map = HashMap::with_capacity(gt.len());
    for &(key, label) in gt {
        check(label)?;
        gt_map.insert(key, label);
    }

    let mut tp = vec![0u64; num_classes];
    let mut fp = vec![0u64; num_classes];
    let mut fne = vec![0u64; num_classes];
    let mut confusion = vec![0u64; num_classes * num_classes];
    let mut matched = 0u64;
    let mut pred_keys = HashMap::with_capacity(pred.len());
    for &(key, label) in pred {
        check(label)?;
        pred_keys.insert(key, label);
        match gt_map.get(&key) {
            Some(&g) => {
                matched += 1;
                confusion[g * num_classes + label] += 1;
                if g == label {
                    tp[label] += 1;
                } else {
                    fp[label] += 1;
                    fne[g] += 1;
                }
            }
            None => fp[label] += 1,
        }
    }
    for (&key, &g) in &gt_map {
        if !pred_keys.contains_key(&key) {
            fne[g] += 1;
        }
    }

    let per_class_iou: Vec<Option<f64>> = (0..num_classes)
        .map(|c| {
            let denom = tp[c] + fp[c] + fne[c];
            (denom > 0).then(|| tp[c] as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per_class_iou.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    let correct: u64 = tp.iter().sum();
    Ok(EvalReport {
        num_classes,
        per_class_iou,
        miou,
        accuracy: correct as f64 / gt_map.len() as f64,
        confusion,
        gt_voxels: gt_map.len() as u64,
        pred_voxels: pred_keys.len() as u64,
        matched_voxels: matched,
    })
}

/// One row of a strategy comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub strategy: String,
    pub report: EvalReport,
}

/// Assemble comparison rows in the given order, checking that all reports
/// share the label set.
pub fn compare_strategies(
    reports: Vec<(String, EvalReport)>,
) -> Result<Vec<ComparisonRow>, MetricsError> {
    if let Some(k) = reports.first().map(|(_, r)| r.num_classes) {
        for (_, r) in &reports {
            if r.num_classes != k {
                return Err(MetricsError::LabelSetMismatch(k, r.num_classes));
            }
        }
    }
    Ok(reports
        .into_iter()
        .map(|(strategy, report)| ComparisonRow { strategy, report })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(i: i64) -> VoxelKey {
        VoxelKey::new(i, 0, 0)
    }

    #[test]
    fn identical_maps_score_one() {
        let rows = vec![(key(0), 0), (key(1), 1), (key(2), 1)];
        let r = evaluate(2, &rows, &rows).unwrap();
        assert_eq!(r.per_class_iou, vec![Some(1.0), Some(1.0)]);
        assert_eq!(r.miou, 1.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.matched_voxels, 3);
    }

    #[test]
    fn all_wrong_labels_score_zero() {
        let gt = vec![(key(0), 0), (key(1), 0)];
        let pred = vec![(key(0), 1), (key(1), 1)];
        let r = evaluate(2, &pred, &gt).unwrap();
        assert_eq!(r.per_class_iou, vec![Some(0.0), Some(0.0)]);
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn hand_confusion_example() {
        // gt {A:0, B:0, C:1}, pred {A:0, B:1, C:1}
        let gt = vec![(key(0), 0), (key(1), 0), (key(2), 1)];
        let pred = vec![(key(0), 0), (key(1), 1), (key(2), 1)];
        let r = evaluate(2, &pred, &gt).unwrap();
        assert_eq!(r.per_class_iou, vec![Some(0.5), Some(0.5)]);
        assert_eq!(r.miou, 0.5);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_keys_count_fp_and_fn() {
        let gt = vec![(key(0), 1)];
        let pred = vec![(key(5), 1)];
        let r = evaluate(2, &pred, &gt).unwrap();
        assert_eq!(r.per_class_iou[1], Some(0.0));
        assert_eq!(r.per_class_iou[0], None);
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.matched_voxels, 0);
    }

    #[test]
    fn empty_gt_is_an_error() {
        assert_eq!(
            evaluate(2, &[(key(0), 0)], &[]).unwrap_err(),
            MetricsError::EmptyGroundTruth
        );
    }

    #[test]
    fn miou_bounded_by_class_ious() {
        let gt = vec![(key(0), 0), (key(1), 1), (key(2), 2), (key(3), 2)];
        let pred = vec![(key(0), 0), (key(1), 2), (key(2), 2), (key(3), 1)];
        let r = evaluate(3, &pred, &gt).unwrap();
        let present: Vec<f64> = r.per_class_iou.iter().flatten().copied().collect();
        let max = present.iter().cloned().fold(f64::MIN, f64::max);
        let min = present.iter().cloned().fold(f64::MAX, f64::min);
        assert!(r.miou <= max + 1e-12 && r.miou >= min - 1e-12);
    }

    #[test]
    fn matches_brute_force_triple_loop_oracle() {
        // randomized maps checked against a per-voxel loop over all classes
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for _ in 0..20 {
            let k = 2 + next() % 5;
            let n = 1 + next() % 300;
            let mut gt = Vec::new();
            let mut pred = Vec::new();
            for i in 0..n {
                let kk = key(i as i64);
                if next() % 4 != 0 {
                    gt.push((kk, next() % k));
                }
                if next() % 4 != 0 {
                    pred.push((kk, next() % k));
                }
            }
            if gt.is_empty() {
                continue;
            }
            let r = evaluate(k, &pred, &gt).unwrap();
            // oracle
            let gm: HashMap<_, _> = gt.iter().copied().collect();
            let pm: HashMap<_, _> = pred.iter().copied().collect();
            let mut correct = 0u64;
            for (kk, &g) in &gm {
                if pm.get(kk) == Some(&g) {
                    correct += 1;
                }
            }
            assert_eq!(r.accuracy, correct as f64 / gm.len() as f64);
            for c in 0..k {
                let mut tp = 0u64;
                let mut union = 0u64;
                let keys: std::collections::HashSet<_> =
                    gm.keys().chain(pm.keys()).copied().collect();
                for kk in keys {
                    let g = gm.get(&kk) == Some(&c);
                    let p = pm.get(&kk) == Some(&c);
                    if g && p {
                        tp += 1;
                    }
                    if g || p {
                        union += 1;
                    }
                }
                let expect = (union > 0).then(|| tp as f64 / union as f64);
                assert_eq!(r.per_class_iou[c], expect, "class {c}");
            }
        }
    }

    #[test]
    fn compare_strategies_checks_label_sets() {
        let gt = vec![(key(0), 0), (key(1), 1)];
        let r2 = evaluate(2, &gt, &gt).unwrap();
        let gt3 = vec![(key(0), 0), (key(1), 2)];
        let r3 = evaluate(3, &gt3, &gt3).unwrap();
        let rows = compare_strategies(vec![
            ("a".into(), r2.clone()),
            ("b".into(), r2.clone()),
        ])
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].report, rows[1].report);
        assert!(matches!(
            compare_strategies(vec![("a".into(), r2), ("b".into(), r3)]).unwrap_err(),
            MetricsError::LabelSetMismatch(2, 3)
        ));
    }
}
