//! Cross-view sharing: response maps against every view's template, the
//! self-supervised fusion-weight regression, per-view fused responses, and
//! per-frame selection of the best view.
//!
//! Each view k correlates its background-suppressed search features against
//! all V adapted templates, giving maps S^{k1..kV}. The weights fusing them
//! are the unconstrained ridge fit of candidate-target features onto the
//! view's own adapted template, re-learned every frame. The view whose
//! fused response peaks highest wins the frame.

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, FeatureMap, Frame};
use crate::tracker::{
    AdaptedTemplate, CrossInput, DroneTrackerState, ResponseMap, ScaledResponse, TrackerEngine,
    Trajectory, ViewStepResult,
};
use crate::Real;

/// Per-view fusion weight vector u (length V). Unconstrained: entries may
/// be negative and need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights<T: Real>(Vec<T>);

impl<T: Real> FusionWeights<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Group of V per-view trackers advancing in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGroupState<T: Real> {
    pub views: Vec<DroneTrackerState<T>>,
    /// Last fusion weight vector learned per view.
    pub weights: Vec<Vec<T>>,
    /// Index of the best view at the last step.
    pub selected_view: usize,
    pub frame_index: usize,
}

impl<T: Real> AgentGroupState<T> {
    pub fn view_count(&self) -> usize {
        self.views.len()
    }
}

/// Outcome of one synchronized group step.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStep {
    pub per_view_boxes: Vec<BoundingBox>,
    pub per_view_scores: Vec<f64>,
    pub selected_view: usize,
    pub selected_box: BoundingBox,
}

/// Response of view k's suppressed search region against view v's adapted
/// template, best over the scale set. With v = k this is exactly the own
/// response.
pub fn cross_response<T: Real>(
    engine: &TrackerEngine<T>,
    k_state: &DroneTrackerState<T>,
    v_template: &AdaptedTemplate<T>,
    frame_k: &Frame,
) -> Result<ScaledResponse<T>> {
    let (resp, _) = engine.scale_search(k_state, &v_template.features, frame_k)?;
    Ok(resp)
}

/// Ridge regression u = (DᵀD + λI)⁻¹ Dᵀy where D's columns are the
/// vectorized candidate features and y the vectorized target template.
/// With λ = 0 the normal equations must be nonsingular.
pub fn learn_fusion_weights<T: Real>(
    tracked_feats: &[FeatureMap<T>],
    target: &FeatureMap<T>,
    lambda_u: T,
) -> Result<FusionWeights<T>> {
    if tracked_feats.is_empty() {
        return Err(Error::Parameter("fusion needs at least one column".into()));
    }
    if lambda_u < T::zero() {
        return Err(Error::Parameter(format!(
            "lambda_u must be >= 0, got {lambda_u}"
        )));
    }
    for f in tracked_feats {
        if !f.same_shape(target) {
            return Err(Error::ShapeMismatch {
                expected: target.shape_str(),
                got: f.shape_str(),
            });
        }
    }
    let v = tracked_feats.len();
    let dot = |a: &FeatureMap<T>, b: &FeatureMap<T>| -> T {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| *x * *y)
            .sum()
    };
    let mut gram = vec![vec![T::zero(); v]; v];
    let mut rhs = vec![T::zero(); v];
    for i in 0..v {
        for j in i..v {
            let g = dot(&tracked_feats[i], &tracked_feats[j]);
            gram[i][j] = g;
            gram[j][i] = g;
        }
        rhs[i] = dot(&tracked_feats[i], target);
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += lambda_u;
    }
    let u = solve_dense(gram, rhs)?;
    Ok(FusionWeights(u))
}

/// Gaussian elimination with partial pivoting for the small (V×V) normal
/// equations.
fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = scale * T::epsilon() * T::from_f64_lossy(n as f64) + T::min_positive_value();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if a[pivot_row][col].abs() <= floor {
            return Err(Error::SingularSystem(
                "fusion normal equations are singular; increase lambda_u".into(),
            ));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let bv = b[col];
            b[row] -= f * bv;
        }
    }
    let mut x = vec![T::zero(); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// Weighted sum of same-shaped response maps; the peak is recomputed on
/// the fused map.
pub fn fuse_responses<T: Real>(
    maps: &[ResponseMap<T>],
    u: &FusionWeights<T>,
) -> Result<ResponseMap<T>> {
    if maps.is_empty() {
        return Err(Error::Parameter(
            "fuse_responses needs at least one map".into(),
        ));
    }
    if maps.len() != u.len() {
        return Err(Error::Alignment(format!(
            "{} maps but {} weights",
            maps.len(),
            u.len()
        )));
    }
    let (h, w) = (maps[0].height, maps[0].width);
    for m in maps {
        if m.height != h || m.width != w {
            return Err(Error::ShapeMismatch {
                expected: format!("{h}x{w}"),
                got: format!("{}x{}", m.height, m.width),
            });
        }
    }
    let mut values = vec![T::zero(); h * w];
    for (m, weight) in maps.iter().zip(u.as_slice()) {
        for (acc, v) in values.iter_mut().zip(m.values()) {
            *acc += *weight * *v;
        }
    }
    Ok(ResponseMap::new(h, w, values))
}

/// Argmax over per-view fused peak scores; ties break to the lowest index.
pub fn select_best_view<T: Real>(fused_scores: &[T]) -> Result<usize> {
    if fused_scores.is_empty() {
        return Err(Error::Parameter(
            "select_best_view needs at least one score".into(),
        ));
    }
    if fused_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Parameter("fused scores must be finite".into()));
    }
    let mut best = 0usize;
    for (i, s) in fused_scores.iter().enumerate().skip(1) {
        if *s > fused_scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Initialize all views from their first-frame annotations and record the
/// frame-0 entries (annotation box, own-response score). Sharing starts at
/// the next step, once the transforms exist.
pub fn init_group<T: Real>(
    engine: &TrackerEngine<T>,
    frames: &[Frame],
    gt_boxes: &[BoundingBox],
) -> Result<(AgentGroupState<T>, GroupStep)> {
    if frames.is_empty() {
        return Err(Error::Parameter("a group needs at least one view".into()));
    }
    if frames.len() != gt_boxes.len() {
        return Err(Error::Synchronization(format!(
            "{} frames for {} initial boxes",
            frames.len(),
            gt_boxes.len()
        )));
    }
    let v = frames.len();
    let mut views = Vec::with_capacity(v);
    let mut scores = Vec::with_capacity(v);
    for k in 0..v {
        let mut state = engine.init_tracker(&frames[k], &gt_boxes[k], k)?;
        engine.update_transforms(&mut state, &frames[k])?;
        let resp0 = engine.compute_own_response(&state, &frames[k])?;
        let score0 = engine.locate(&state, &resp0).score;
        state.score_history.push(T::from_f64_lossy(score0));
        views.push(state);
        scores.push(score0);
    }
    let selected = if engine.config().view_fusion {
        select_best_view(&scores)?
    } else {
        0
    };
    let weights = (0..v).map(|k| one_hot::<T>(v, k)).collect();
    let group = AgentGroupState {
        views,
        weights,
        selected_view: selected,
        frame_index: 0,
    };
    let step = GroupStep {
        per_view_boxes: gt_boxes.to_vec(),
        per_view_scores: scores,
        selected_view: selected,
        selected_box: gt_boxes[selected],
    };
    Ok((group, step))
}

/// Advance every view by one synchronized frame: per-view responses against
/// all shared templates, weight learning, fusion, localization and
/// re-detection, then selection of the best view. Views keep their own
/// positions; the selected box is in the selected view's coordinates.
pub fn step_group<T: Real>(
    engine: &TrackerEngine<T>,
    group: &mut AgentGroupState<T>,
    frames: &[Frame],
) -> Result<GroupStep> {
    let v = group.views.len();
    if frames.len() != v {
        return Err(Error::Synchronization(format!(
            "group has {v} views but {} frames were supplied",
            frames.len()
        )));
    }
    let sharing = engine.config().sharing && v > 1;
    let templates: Vec<AdaptedTemplate<T>> = if sharing {
        group
            .views
            .iter()
            .map(|s| engine.adapted_template(s))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut results: Vec<(ViewStepResult<T>, bool)> = Vec::with_capacity(v);
    for k in 0..v {
        let cross = sharing.then_some(CrossInput {
            templates: &templates,
            own_index: k,
        });
        match engine.step_view(&group.views[k], &frames[k], cross) {
            Ok(step) => results.push((step, false)),
            // degrade like the single-view driver: keep the previous box
            Err(_) => results.push((
                ViewStepResult {
                    bbox: group.views[k].current_box,
                    score: 0.0,
                    scale: group.views[k].current_scale,
                    weights: one_hot(v, k),
                    redetected: false,
                    lost: group.views[k].lost,
                },
                true,
            )),
        }
    }

    let scores: Vec<f64> = results.iter().map(|(r, _)| r.score).collect();
    // Selection compares each view's fused peak relative to that view's own
    // running-maximum score. Per-view transform and fusion-weight histories
    // drift the absolute score scales apart, and raw comparison then favors
    // whichever view's scale inflated rather than whichever view actually
    // sees the target.
    let selected = if engine.config().view_fusion {
        let rel: Vec<f64> = results
            .iter()
            .enumerate()
            .map(|(k, (r, _))| {
                let m = group.views[k]
                    .score_history
                    .running_max()
                    .to_f64_lossy()
                    .max(1e-12);
                r.score / m
            })
            .collect();
        select_best_view(&rel)?
    } else {
        0
    };

    let mut boxes = Vec::with_capacity(v);
    for (k, (step, failed)) in results.iter().enumerate() {
        boxes.push(step.bbox);
        group.weights[k] = if sharing {
            step.weights.clone()
        } else {
            one_hot(v, k)
        };
        if *failed {
            // the view was not located this frame; skip its refresh
            group.views[k].frame_index += 1;
            continue;
        }
        engine.commit_view_step(&mut group.views[k], &frames[k], step)?;
    }
    group.selected_view = selected;
    group.frame_index += 1;

    Ok(GroupStep {
        selected_box: boxes[selected],
        per_view_boxes: boxes,
        per_view_scores: scores,
        selected_view: selected,
    })
}

/// Track a whole group held in memory; returns one trajectory per view
/// (entries carry the per-frame selected view).
pub fn track_group<T: Real>(
    engine: &TrackerEngine<T>,
    view_frames: &[Vec<Frame>],
    gt_boxes: &[BoundingBox],
) -> Result<Vec<Trajectory>> {
    if view_frames.is_empty() {
        return Err(Error::Parameter("a group needs at least one view".into()));
    }
    let n = view_frames[0].len();
    for (k, vf) in view_frames.iter().enumerate() {
        if vf.len() != n {
            return Err(Error::Synchronization(format!(
                "view 0 has {n} frames but view {k} has {}",
                vf.len()
            )));
        }
    }
    if n == 0 {
        return Err(Error::Parameter("a group needs at least one frame".into()));
    }
    let first: Vec<Frame> = view_frames.iter().map(|vf| vf[0].clone()).collect();
    let (mut group, step0) = init_group(engine, &first, gt_boxes)?;
    let v = group.view_count();
    let mut trajs = vec![Trajectory::default(); v];
    for k in 0..v {
        trajs[k].push(
            step0.per_view_boxes[k],
            step0.per_view_scores[k],
            Some(step0.selected_view),
        );
    }
    for t in 1..n {
        let frames: Vec<Frame> = view_frames.iter().map(|vf| vf[t].clone()).collect();
        let step = step_group(engine, &mut group, &frames)?;
        for k in 0..v {
            trajs[k].push(
                step.per_view_boxes[k],
                step.per_view_scores[k],
                Some(step.selected_view),
            );
        }
    }
    Ok(trajs)
}

fn one_hot<T: Real>(len: usize, index: usize) -> Vec<T> {
    let mut v = vec![T::zero(); len];
    v[index] = T::one();
    v
}
