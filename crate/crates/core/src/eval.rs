//! Evaluation: overlap/center-error frame scores, OPE success and precision
//! curves, the multi-view fusion metrics (selected-view average and
//! per-frame-max upper bound), and attribute-conditioned breakdowns.
//!
//! Frames whose ground truth marks the target fully out of view are
//! excluded from per-view curve denominators. The multi-view metrics run
//! over frames where at least one view has valid ground truth; a selection
//! landing on a view without valid ground truth scores 0 for that frame,
//! which keeps the per-frame-max metric an upper bound for every selection
//! strategy.

use crate::dataio::{AttributeSet, ATTRIBUTE_NAMES};
use crate::error::{Error, Result};
use crate::imaging::BoundingBox;
use crate::tracker::Trajectory;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Per-frame score: `None` when the frame is excluded (no valid ground
/// truth), otherwise IoU (success mode) or a 0/1 center-error indicator
/// (precision mode).
pub type FrameScore = Option<f64>;

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

/// Euclidean distance between box centers, in pixels.
pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Threshold sweep with its area-under-curve (mean of values over the
/// uniform grid).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    pub auc: f64,
}

impl EvalCurve {
    fn from_values(thresholds: Vec<f64>, values: Vec<f64>) -> Self {
        let auc = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        Self {
            thresholds,
            values,
            auc,
        }
    }

    /// Curve value at an exact grid threshold.
    pub fn value_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|t| (*t - threshold).abs() < 1e-9)
            .map(|i| self.values[i])
    }

    /// Write as `threshold,value` CSV rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("threshold,value\n");
        for (t, v) in self.thresholds.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn check_alignment(traj: &Trajectory, gt: &[Option<BoundingBox>]) -> Result<()> {
    if traj.len() != gt.len() {
        return Err(Error::Alignment(format!(
            "trajectory has {} frames but ground truth has {}",
            traj.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Per-frame IoU against ground truth; `None` on out-of-view frames.
pub fn success_scores(traj: &Trajectory, gt: &[Option<BoundingBox>]) -> Result<Vec<FrameScore>> {
    check_alignment(traj, gt)?;
    Ok(traj
        .entries
        .iter()
        .zip(gt)
        .map(|(e, g)| g.as_ref().map(|g| iou(&e.bbox, g)))
        .collect())
}

/// Per-frame center-error indicator at `tau` pixels; `None` on out-of-view
/// frames.
pub fn precision_scores(
    traj: &Trajectory,
    gt: &[Option<BoundingBox>],
    tau: f64,
) -> Result<Vec<FrameScore>> {
    check_alignment(traj, gt)?;
    Ok(traj
        .entries
        .iter()
        .zip(gt)
        .map(|(e, g)| {
            g.as_ref().map(|g| {
                if center_error(&e.bbox, g) <= tau {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect())
}

/// Per-frame center errors; `None` on out-of-view frames.
pub fn center_errors(traj: &Trajectory, gt: &[Option<BoundingBox>]) -> Result<Vec<Option<f64>>> {
    check_alignment(traj, gt)?;
    Ok(traj
        .entries
        .iter()
        .zip(gt)
        .map(|(e, g)| g.as_ref().map(|g| center_error(&e.bbox, g)))
        .collect())
}

/// Success plot from per-frame IoU values: for each threshold in
/// {0.00, 0.01, …, 1.00}, the fraction of valid frames strictly above it.
pub fn curve_from_ious(ious: &[FrameScore]) -> EvalCurve {
    let valid: Vec<f64> = ious.iter().copied().flatten().collect();
    let thresholds: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let values = thresholds
        .iter()
        .map(|t| {
            if valid.is_empty() {
                0.0
            } else {
                valid.iter().filter(|s| **s > *t).count() as f64 / valid.len() as f64
            }
        })
        .collect();
    EvalCurve::from_values(thresholds, values)
}

/// Precision plot from per-frame center errors, over thresholds
/// {0, 1, …, 50} px; the headline value is read at 20 px.
pub fn curve_from_center_errors(errors: &[Option<f64>]) -> EvalCurve {
    let valid: Vec<f64> = errors.iter().copied().flatten().collect();
    let thresholds: Vec<f64> = (0..=50).map(|i| i as f64).collect();
    let values = thresholds
        .iter()
        .map(|t| {
            if valid.is_empty() {
                0.0
            } else {
                valid.iter().filter(|e| **e <= *t).count() as f64 / valid.len() as f64
            }
        })
        .collect();
    EvalCurve::from_values(thresholds, values)
}

/// Success plot of one trajectory against ground truth.
pub fn success_curve(traj: &Trajectory, gt: &[Option<BoundingBox>]) -> Result<EvalCurve> {
    Ok(curve_from_ious(&success_scores(traj, gt)?))
}

/// Precision plot of one trajectory against ground truth.
pub fn precision_curve(traj: &Trajectory, gt: &[Option<BoundingBox>]) -> Result<EvalCurve> {
    Ok(curve_from_center_errors(&center_errors(traj, gt)?))
}

/// Turn logged per-frame view selections into one-hot weight rows.
pub fn one_hot_weights(selections: &[usize], view_count: usize) -> Vec<Vec<f64>> {
    selections
        .iter()
        .map(|&b| {
            let mut row = vec![0.0; view_count];
            row[b] = 1.0;
            row
        })
        .collect()
}

fn validate_one_hot(row: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (v, w) in row.iter().enumerate() {
        if *w == 1.0 {
            if hot.is_some() {
                return Err(Error::InvalidWeights("more than one view selected".into()));
            }
            hot = Some(v);
        } else if *w != 0.0 {
            return Err(Error::InvalidWeights(format!(
                "weight {w} is neither 0 nor 1"
            )));
        }
    }
    hot.ok_or_else(|| Error::InvalidWeights("no view selected".into()))
}

/// Selected-view average: the mean over frames of the selected view's
/// frame score, with the selection given as one-hot weight rows (n × V).
/// Frames where no view has valid ground truth are skipped; a selection
/// landing on an invalid view scores 0.
pub fn afs(per_view_scores: &[Vec<FrameScore>], weights: &[Vec<f64>]) -> Result<f64> {
    let v = per_view_scores.len();
    if v == 0 {
        return Err(Error::Parameter("afs needs at least one view".into()));
    }
    let n = per_view_scores[0].len();
    for scores in per_view_scores {
        if scores.len() != n {
            return Err(Error::Alignment("per-view score lengths differ".into()));
        }
    }
    if weights.len() != n {
        return Err(Error::Alignment(format!(
            "{n} frames but {} weight rows",
            weights.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, row) in weights.iter().enumerate() {
        if row.len() != v {
            return Err(Error::InvalidWeights(format!(
                "weight row {i} has length {}, expected {v}",
                row.len()
            )));
        }
        let sel = validate_one_hot(row)?;
        if (0..v).any(|k| per_view_scores[k][i].is_some()) {
            total += per_view_scores[sel][i].unwrap_or(0.0);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Per-frame maximum across views, averaged over frames: the upper bound
/// any selection strategy can reach.
pub fn ifs(per_view_scores: &[Vec<FrameScore>]) -> Result<f64> {
    let v = per_view_scores.len();
    if v == 0 {
        return Err(Error::Parameter("ifs needs at least one view".into()));
    }
    let n = per_view_scores[0].len();
    for scores in per_view_scores {
        if scores.len() != n {
            return Err(Error::Alignment("per-view score lengths differ".into()));
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let best = (0..v)
            .filter_map(|k| per_view_scores[k][i])
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_finite() {
            total += best.max(0.0);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Headline metrics for one evaluated group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct GroupMetrics {
    pub success_auc: f64,
    pub precision_20px: f64,
    pub afs_success: f64,
    pub afs_precision: f64,
    pub ifs_success: f64,
    pub ifs_precision: f64,
}

impl GroupMetrics {
    fn mean(items: &[GroupMetrics]) -> GroupMetrics {
        let n = items.len() as f64;
        let mut m = GroupMetrics::default();
        for g in items {
            m.success_auc += g.success_auc / n;
            m.precision_20px += g.precision_20px / n;
            m.afs_success += g.afs_success / n;
            m.afs_precision += g.afs_precision / n;
            m.ifs_success += g.ifs_success / n;
            m.ifs_precision += g.ifs_precision / n;
        }
        m
    }
}

/// Average metrics over the subset of groups carrying each attribute flag.
/// Attributes with an empty subset map to `None` rather than zero.
pub fn attribute_breakdown(
    results: &[(AttributeSet, GroupMetrics)],
    attributes: &[&str],
) -> Result<BTreeMap<String, Option<GroupMetrics>>> {
    let mut table = BTreeMap::new();
    for name in attributes {
        let idx = ATTRIBUTE_NAMES
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::UnknownAttribute((*name).into()))?;
        let subset: Vec<GroupMetrics> = results
            .iter()
            .filter(|(attrs, _)| attrs.flags[idx])
            .map(|(_, m)| *m)
            .collect();
        let entry = if subset.is_empty() {
            None
        } else {
            Some(GroupMetrics::mean(&subset))
        };
        table.insert((*name).to_string(), entry);
    }
    Ok(table)
}

/// Per-view one-pass numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ViewOpe {
    pub success_auc: f64,
    pub precision_20px: f64,
}

/// JSON summary emitted by the benchmark harness.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub groups: usize,
    pub success_auc: f64,
    pub precision_20px: f64,
    pub afs_success: f64,
    pub afs_precision: f64,
    pub ifs_success: f64,
    pub ifs_precision: f64,
    pub per_view: BTreeMap<String, ViewOpe>,
    pub per_attribute: BTreeMap<String, Option<GroupMetrics>>,
}

impl SummaryReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::Trajectory;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox { x, y, w, h }
    }

    fn traj_of(boxes: &[BoundingBox]) -> Trajectory {
        let mut t = Trajectory::default();
        for b in boxes {
            t.push(*b, 1.0, None);
        }
        t
    }

    #[test]
    fn iou_identity_disjoint_and_partial() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        let far = bx(10.0, 10.0, 2.0, 2.0);
        assert_eq!(iou(&a, &far), 0.0);
        // intersection 2, union 6
        let b = bx(1.0, 0.0, 2.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn center_error_pythagorean() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(center_error(&a, &a), 0.0);
        let b = bx(3.0, 4.0, 2.0, 2.0);
        assert!((center_error(&a, &b) - 5.0).abs() < 1e-12);
        assert_eq!(center_error(&a, &b), center_error(&b, &a));
    }

    #[test]
    fn perfect_tracking_success_curve() {
        let boxes = vec![bx(0.0, 0.0, 4.0, 4.0); 5];
        let gt: Vec<Option<BoundingBox>> = boxes.iter().copied().map(Some).collect();
        let curve = success_curve(&traj_of(&boxes), &gt).unwrap();
        for (t, v) in curve.thresholds.iter().zip(&curve.values) {
            if *t < 1.0 {
                assert_eq!(*v, 1.0);
            }
        }
        assert!(curve.auc > 0.98);
    }

    #[test]
    fn disjoint_tracking_is_flat_zero() {
        let boxes = vec![bx(0.0, 0.0, 2.0, 2.0); 3];
        let gt = vec![Some(bx(50.0, 50.0, 2.0, 2.0)); 3];
        let curve = success_curve(&traj_of(&boxes), &gt).unwrap();
        assert!(curve.values.iter().all(|v| *v == 0.0));
        assert_eq!(curve.auc, 0.0);
    }

    #[test]
    fn two_frame_success_enumeration() {
        // IoUs {1.0, 1/3}: curve 1.0 below 1/3, 0.5 from 1/3 up to 1.0
        let traj = traj_of(&[bx(0.0, 0.0, 2.0, 2.0), bx(1.0, 0.0, 2.0, 2.0)]);
        let gt = vec![Some(bx(0.0, 0.0, 2.0, 2.0)); 2];
        let curve = success_curve(&traj, &gt).unwrap();
        assert_eq!(curve.value_at(0.2).unwrap(), 1.0);
        assert_eq!(curve.value_at(0.5).unwrap(), 0.5);
        assert_eq!(curve.value_at(0.99).unwrap(), 0.5);
    }

    #[test]
    fn success_curve_is_non_increasing() {
        let traj = traj_of(&[
            bx(0.0, 0.0, 4.0, 4.0),
            bx(1.0, 1.0, 4.0, 4.0),
            bx(2.5, 0.0, 4.0, 4.0),
        ]);
        let gt = vec![Some(bx(0.0, 0.0, 4.0, 4.0)); 3];
        let curve = success_curve(&traj, &gt).unwrap();
        for w in curve.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn out_of_view_frames_leave_the_denominator() {
        let traj = traj_of(&[bx(0.0, 0.0, 2.0, 2.0), bx(9.0, 9.0, 2.0, 2.0)]);
        let gt = vec![Some(bx(0.0, 0.0, 2.0, 2.0)), None];
        let curve = success_curve(&traj, &gt).unwrap();
        assert_eq!(curve.value_at(0.5).unwrap(), 1.0);
    }

    #[test]
    fn precision_step_function() {
        let traj = traj_of(&[bx(30.0, 0.0, 2.0, 2.0)]);
        let gt = vec![Some(bx(0.0, 0.0, 2.0, 2.0))];
        let curve = precision_curve(&traj, &gt).unwrap();
        assert_eq!(curve.value_at(29.0).unwrap(), 0.0);
        assert_eq!(curve.value_at(30.0).unwrap(), 1.0);
        assert_eq!(curve.value_at(50.0).unwrap(), 1.0);
        for w in curve.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn precision_headline_is_read_at_20px() {
        let traj = traj_of(&[bx(0.0, 0.0, 2.0, 2.0), bx(19.0, 0.0, 2.0, 2.0)]);
        let gt = vec![Some(bx(0.0, 0.0, 2.0, 2.0)); 2];
        let curve = precision_curve(&traj, &gt).unwrap();
        assert_eq!(curve.value_at(20.0).unwrap(), 1.0);
    }

    #[test]
    fn alignment_mismatch_is_an_error() {
        let traj = traj_of(&[bx(0.0, 0.0, 2.0, 2.0)]);
        let gt = vec![Some(bx(0.0, 0.0, 2.0, 2.0)); 2];
        assert!(matches!(
            success_curve(&traj, &gt),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn afs_hand_fixture() {
        let scores = vec![vec![Some(0.8), Some(0.2)], vec![Some(0.5), Some(0.6)]];
        let weights = one_hot_weights(&[0, 1], 2);
        let a = afs(&scores, &weights).unwrap();
        assert!((a - 0.7).abs() < 1e-12);
        let i = ifs(&scores).unwrap();
        assert!((i - 0.7).abs() < 1e-12);
    }

    #[test]
    fn afs_degenerate_selections() {
        let scores = vec![
            vec![Some(0.8), Some(0.2), Some(0.4)],
            vec![Some(0.5), Some(0.6), Some(0.9)],
        ];
        let all_first = one_hot_weights(&[0, 0, 0], 2);
        let a = afs(&scores, &all_first).unwrap();
        assert!((a - (0.8 + 0.2 + 0.4) / 3.0).abs() < 1e-12);

        // single view reduces to that view's mean
        let single = vec![vec![Some(0.3), Some(0.7)]];
        let w = one_hot_weights(&[0, 0], 1);
        assert!((afs(&single, &w).unwrap() - 0.5).abs() < 1e-12);
        assert!((ifs(&single).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_one_hot_rows_rejected() {
        let scores = vec![vec![Some(0.5)], vec![Some(0.6)]];
        for bad in [
            vec![vec![1.0, 1.0]],
            vec![vec![0.0, 0.0]],
            vec![vec![0.5, 0.5]],
        ] {
            assert!(matches!(afs(&scores, &bad), Err(Error::InvalidWeights(_))));
        }
    }

    #[test]
    fn ifs_dominates_afs_on_random_matrices() {
        let mut state = 42u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let v = 1 + (next() * 4.0) as usize;
            let n = 1 + (next() * 30.0) as usize;
            let scores: Vec<Vec<FrameScore>> = (0..v)
                .map(|_| (0..n).map(|_| Some(next())).collect())
                .collect();
            let sels: Vec<usize> = (0..n).map(|_| (next() * v as f64) as usize % v).collect();
            let weights = one_hot_weights(&sels, v);
            let a = afs(&scores, &weights).unwrap();
            let i = ifs(&scores).unwrap();
            assert!(i >= a - 1e-12, "ifs {i} < afs {a}");
            assert!(a >= 0.0);

            // the per-frame best also dominates every view's own mean
            for view in &scores {
                let mean = view.iter().flatten().sum::<f64>() / n as f64;
                assert!(i >= mean - 1e-12);
            }

            // equality when the selection matches the per-frame argmax
            let arg: Vec<usize> = (0..n)
                .map(|f| {
                    (0..v)
                        .max_by(|&x, &y| scores[x][f].partial_cmp(&scores[y][f]).unwrap())
                        .unwrap()
                })
                .collect();
            let aw = one_hot_weights(&arg, v);
            let a_best = afs(&scores, &aw).unwrap();
            assert!((a_best - i).abs() < 1e-12);
        }
    }

    #[test]
    fn breakdown_rows() {
        let mut day = AttributeSet::default();
        day.flags[0] = true;
        let mut day_cm = AttributeSet::default();
        day_cm.flags[0] = true;
        day_cm.flags[2] = true;
        let m1 = GroupMetrics {
            success_auc: 0.4,
            ..GroupMetrics::default()
        };
        let m2 = GroupMetrics {
            success_auc: 0.8,
            ..GroupMetrics::default()
        };
        let table =
            attribute_breakdown(&[(day, m1), (day_cm, m2)], &["DAY", "NIGHT", "CM"]).unwrap();
        assert!((table["DAY"].unwrap().success_auc - 0.6).abs() < 1e-12);
        assert!(table["NIGHT"].is_none());
        assert!((table["CM"].unwrap().success_auc - 0.8).abs() < 1e-12);

        assert!(matches!(
            attribute_breakdown(&[], &["BOGUS"]),
            Err(Error::UnknownAttribute(_))
        ));
    }
}
