//! Single-view base tracker: state initialization, per-frame transform
//! updates, scale-searched response computation, peak-to-box localization,
//! and the sequence driver.
//!
//! The per-frame recipe: correlate the variation-adapted first-frame
//! template against the background-suppressed, cosine-windowed features of
//! a padded search region around the previous box, over a small set of
//! candidate scales. The peak of the (possibly fused) response maps back to
//! frame coordinates. Both transforms are re-solved from scratch after each
//! frame.

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::freqsolve::{
    circular_convolve, correlate, solve_suppression_transform, solve_variation_transform,
    zero_phase_filter,
};
use crate::fusion;
use crate::imaging::{
    cosine_window, extract_patch, extract_patch_rect, gaussian_weight_map, weight_frame,
    BoundingBox, FeatureExtractor, FeatureMap, Frame, GrayGradientExtractor,
};
use crate::redetect::{expand_search, should_redetect, threshold, ScoreHistory};
use crate::Real;
use std::sync::Arc;

/// 2-D correlation score surface with its peak precomputed.
/// Ties resolve to the first peak in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap<T: Real> {
    pub height: usize,
    pub width: usize,
    values: Vec<T>,
    pub peak_value: T,
    pub peak_pos: (usize, usize),
}

impl<T: Real> ResponseMap<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), height * width);
        let mut peak_value = T::neg_infinity();
        let mut peak_idx = 0usize;
        for (i, v) in values.iter().enumerate() {
            if *v > peak_value {
                peak_value = *v;
                peak_idx = i;
            }
        }
        if values.is_empty() {
            peak_value = T::zero();
        }
        Self {
            height,
            width,
            values,
            peak_value,
            peak_pos: (peak_idx / width.max(1), peak_idx % width.max(1)),
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Same map with every value multiplied by a (positive) factor.
    pub fn scaled(&self, factor: T) -> Self {
        Self::new(
            self.height,
            self.width,
            self.values.iter().map(|v| *v * factor).collect(),
        )
    }
}

/// Per-frame tracking output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub bbox: BoundingBox,
    pub score: f64,
    pub selected_view: Option<usize>,
}

/// Per-frame boxes, peak scores, and (for multi-view runs) selected views.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn push(&mut self, bbox: BoundingBox, score: f64, selected_view: Option<usize>) {
        self.entries.push(TrajectoryEntry {
            bbox,
            score,
            selected_view,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn boxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.entries.iter().map(|e| &e.bbox)
    }
}

/// Per-view tracker state.
#[derive(Debug, Clone, PartialEq)]
pub struct DroneTrackerState<T: Real> {
    pub drone_id: usize,
    /// First-frame template features; fixed for the sequence.
    pub template_features: FeatureMap<T>,
    /// Appearance-variation transform, template-shaped.
    pub variation_transform: FeatureMap<T>,
    /// Background-suppression transform, search-shaped.
    pub suppression_transform: FeatureMap<T>,
    pub current_box: BoundingBox,
    pub current_scale: f64,
    /// First-frame box; current dims are always initial dims × scale.
    pub initial_box: BoundingBox,
    pub score_history: ScoreHistory<T>,
    pub frame_index: usize,
    /// The target is currently judged lost; expansion retries every frame
    /// and transform updates pause until recovery.
    pub lost: bool,
}

/// Geometry of one extracted search region, needed to map a response peak
/// back to frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchContext {
    pub center: (f64, f64),
    pub region_w: f64,
    pub region_h: f64,
    pub out_w: usize,
    pub out_h: usize,
    pub scale_step: f64,
}

/// Best response over the scale set, with the producing geometry recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledResponse<T: Real> {
    pub map: ResponseMap<T>,
    pub ctx: SearchContext,
    pub penalized_peak: T,
}

/// Embedded search-region features for one scale candidate.
pub(crate) struct SearchFeatures<T: Real> {
    /// Raw features (expansion path) or windowed features (normal path).
    pub feats: FeatureMap<T>,
    /// W ⊗ windowed features; present on the normal path only.
    pub suppressed: Option<FeatureMap<T>>,
    pub ctx: SearchContext,
}

/// Peak mapped back to frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatedBox {
    pub bbox: BoundingBox,
    pub score: f64,
    pub scale: f64,
    /// Peak sat at (or beyond) the edge of the valid displacement range.
    pub border: bool,
}

/// One view's adapted template (M ⊗ F₁) with its energy, shared across
/// views each frame.
#[derive(Debug, Clone)]
pub struct AdaptedTemplate<T: Real> {
    pub features: FeatureMap<T>,
    pub norm: T,
}

pub(crate) struct CrossInput<'a, T: Real> {
    pub templates: &'a [AdaptedTemplate<T>],
    pub own_index: usize,
}

pub(crate) struct ViewStepResult<T: Real> {
    pub bbox: BoundingBox,
    pub score: f64,
    pub scale: f64,
    pub weights: Vec<T>,
    pub redetected: bool,
    pub lost: bool,
}

/// Tracker driver: configuration, feature extractor, and the precomputed
/// window/weight maps shared by every state it owns.
pub struct TrackerEngine<T: Real> {
    cfg: TrackerConfig,
    extractor: Arc<dyn FeatureExtractor<T>>,
    window: FeatureMap<T>,
    gaussian_px: FeatureMap<f64>,
}

/// Parabolic sub-cell refinement of a response peak, per axis, with
/// circular neighbors. Cell-resolution localization feeds its rounding
/// error back through the per-frame transform solves (the variation
/// transform absorbs a constant offset as a translation), so under steady
/// motion the error grows by `round(v) − v` every frame; fitting the peak's
/// three-point parabola keeps it bounded. Degenerate (flat) neighborhoods
/// return zero offset, so single-spike and flat maps localize exactly at
/// the peak cell.
fn subcell_offset<T: Real>(map: &ResponseMap<T>, pr: usize, pc: usize) -> (f64, f64) {
    let (h, w) = (map.height as i64, map.width as i64);
    let at = |y: i64, x: i64| -> f64 {
        let yy = ((y % h + h) % h) as usize;
        let xx = ((x % w + w) % w) as usize;
        map.get(yy, xx).to_f64_lossy()
    };
    let c = at(pr as i64, pc as i64);
    let fit = |lo: f64, hi: f64| -> f64 {
        let denom = lo + hi - 2.0 * c;
        if denom.abs() > 1e-12 * c.abs().max(1.0) {
            (0.5 * (lo - hi) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let sy = if h > 2 {
        fit(at(pr as i64 - 1, pc as i64), at(pr as i64 + 1, pc as i64))
    } else {
        0.0
    };
    let sx = if w > 2 {
        fit(at(pr as i64, pc as i64 - 1), at(pr as i64, pc as i64 + 1))
    } else {
        0.0
    };
    (sy, sx)
}

impl<T: Real> TrackerEngine<T> {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        let extractor = Arc::new(GrayGradientExtractor::new(cfg.cell_size)?);
        Self::with_extractor(cfg, extractor)
    }

    pub fn with_extractor(
        cfg: TrackerConfig,
        extractor: Arc<dyn FeatureExtractor<T>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if extractor.cell_size() != cfg.cell_size {
            return Err(Error::Config(format!(
                "extractor cell_size {} does not match config cell_size {}",
                extractor.cell_size(),
                cfg.cell_size
            )));
        }
        let search_px = cfg.search_size();
        let cells = search_px / cfg.cell_size;
        let window = cosine_window(cells, cells)?;
        let gaussian_px = gaussian_weight_map(search_px, search_px, cfg.gaussian_sigma_px())?;
        Ok(Self {
            cfg,
            extractor,
            window,
            gaussian_px,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn extractor(&self) -> &Arc<dyn FeatureExtractor<T>> {
        &self.extractor
    }

    /// Initialize a view tracker from the annotated first-frame box. Both
    /// transforms start as the convolution identity.
    pub fn init_tracker(
        &self,
        frame: &Frame,
        gt_box: &BoundingBox,
        drone_id: usize,
    ) -> Result<DroneTrackerState<T>> {
        if !(gt_box.w > 0.0 && gt_box.h > 0.0) {
            return Err(Error::InvalidBox(format!(
                "initial box must have positive dimensions, got {}x{}",
                gt_box.w, gt_box.h
            )));
        }
        let tp = self.cfg.template_size;
        let patch = extract_patch(frame, gt_box, 1.0, tp)?;
        let template_features = self.extractor.embed(&patch)?;
        let cells = self.cfg.search_size() / self.cfg.cell_size;
        Ok(DroneTrackerState {
            drone_id,
            variation_transform: FeatureMap::impulse(
                template_features.height,
                template_features.width,
                template_features.channels,
            ),
            suppression_transform: FeatureMap::impulse(cells, cells, template_features.channels),
            template_features,
            current_box: *gt_box,
            current_scale: 1.0,
            initial_box: *gt_box,
            score_history: ScoreHistory::new(self.cfg.redetect.q),
            frame_index: 0,
            lost: false,
        })
    }

    /// Re-solve both transforms from the frame in which `current_box` was
    /// just located, preparing the state for the next frame.
    ///
    /// The update crop is alignment-corrected against the fixed first-frame
    /// template first. Without this, any residual localization offset is
    /// absorbed by the variation transform as a translation, localization
    /// becomes relative to the box instead of the target, and per-frame
    /// estimation bias integrates over the sequence.
    pub fn update_transforms(&self, state: &mut DroneTrackerState<T>, frame: &Frame) -> Result<()> {
        let lambda_m = T::from_f64_lossy(self.cfg.lambda_m);
        let lambda_w = T::from_f64_lossy(self.cfg.lambda_w);

        // appearance variation: first-frame template vs latest target
        let target_patch = extract_patch(frame, &state.current_box, 1.0, self.cfg.template_size)?;
        let f_latest = self.extractor.embed(&target_patch)?;
        let (off_y, off_x) = self.template_alignment_offset(state, &f_latest);
        let centered_box = if off_y == 0.0 && off_x == 0.0 {
            state.current_box
        } else {
            let cell = self.cfg.cell_size as f64;
            let tp = self.cfg.template_size as f64;
            let (cx, cy) = state.current_box.center();
            BoundingBox::centered_at(
                cx + off_x * cell * state.current_box.w / tp,
                cy + off_y * cell * state.current_box.h / tp,
                state.current_box.w,
                state.current_box.h,
            )
        };
        let f_aligned = if centered_box == state.current_box {
            f_latest
        } else {
            let patch = extract_patch(frame, &centered_box, 1.0, self.cfg.template_size)?;
            self.extractor.embed(&patch)?
        };
        state.variation_transform =
            solve_variation_transform(&state.template_features, &f_aligned, lambda_m)?;

        // background suppression: search-sized region vs its Gaussian-weighted copy
        let search_px = self.cfg.search_size();
        let region = extract_patch(frame, &centered_box, self.cfg.pad_factor, search_px)?;
        let weighted = weight_frame(&region, &self.gaussian_px)?;
        let f_region = self.extractor.embed(&region)?;
        let f_weighted = self.extractor.embed(&weighted)?;
        // λ_w is relative to each channel's mean spectral power (per
        // Parseval, its mean spatial energy). An absolute λ underdamps the
        // weak frequency bins that the pixel-domain Gaussian spills energy
        // into, and the resulting inverse-filter gain builds false response
        // peaks out of background structure; channel energies differ by
        // orders of magnitude, so the scaling is per channel.
        let (h, w) = (f_region.height, f_region.width);
        let mut suppression = FeatureMap::zeros(h, w, f_region.channels);
        for c in 0..f_region.channels {
            let reg_c = FeatureMap::from_planes(h, w, 1, f_region.plane(c).to_vec());
            let wgt_c = FeatureMap::from_planes(h, w, 1, f_weighted.plane(c).to_vec());
            let power = reg_c.values().iter().map(|v| *v * *v).sum::<T>();
            let sol =
                solve_suppression_transform(&reg_c, &wgt_c, lambda_w * power.max(T::epsilon()))?;
            suppression.plane_mut(c).copy_from_slice(sol.plane(0));
        }
        state.suppression_transform = suppression;
        Ok(())
    }

    /// Offset (in feature cells) of the freshly cropped target relative to
    /// the first-frame template, from the raw correlation peak with
    /// sub-cell refinement. Capped at ±2 cells; larger discrepancies are
    /// left for the next localization to resolve.
    fn template_alignment_offset(
        &self,
        state: &DroneTrackerState<T>,
        f_patch: &FeatureMap<T>,
    ) -> (f64, f64) {
        let resp = match correlate(&state.template_features, f_patch) {
            Ok(r) => r,
            Err(_) => return (0.0, 0.0),
        };
        let (h, w) = (resp.height as f64, resp.width as f64);
        let (pr, pc) = resp.peak_pos;
        let (sub_y, sub_x) = subcell_offset(&resp, pr, pc);
        let mut dy = pr as f64 + sub_y;
        let mut dx = pc as f64 + sub_x;
        if dy > h / 2.0 {
            dy -= h;
        }
        if dx > w / 2.0 {
            dx -= w;
        }
        (dy.clamp(-2.0, 2.0), dx.clamp(-2.0, 2.0))
    }

    /// M ⊗ F₁ for a state, with its energy (used by cross-view sharing).
    pub fn adapted_template(&self, state: &DroneTrackerState<T>) -> Result<AdaptedTemplate<T>> {
        let features = circular_convolve(&state.variation_transform, &state.template_features)?;
        let norm = features.l2_norm() + T::epsilon();
        Ok(AdaptedTemplate { features, norm })
    }

    /// Best own-template response over the scale set, scale recorded.
    pub fn compute_own_response(
        &self,
        state: &DroneTrackerState<T>,
        frame: &Frame,
    ) -> Result<ScaledResponse<T>> {
        let adapted = self.adapted_template(state)?;
        let (resp, _) = self.scale_search(state, &adapted.features, frame)?;
        Ok(resp)
    }

    /// Map a response peak back to a frame-coordinate box. The box keeps
    /// the initial aspect ratio, scaled by the (cumulative) chosen scale.
    pub fn locate(&self, state: &DroneTrackerState<T>, response: &ScaledResponse<T>) -> LocatedBox {
        self.locate_map(state, &response.map, &response.ctx)
    }

    /// Peak restricted to the geometrically valid displacement window
    /// [d0 − R, d0 + R]. Bins outside it correspond to wrapped template
    /// placements straddling the circular boundary, which never describe a
    /// real target location; suppression and windowing leave enough energy
    /// in that stitch zone to create competitive false peaks.
    pub(crate) fn constrained_peak(
        &self,
        state: &DroneTrackerState<T>,
        map: &ResponseMap<T>,
    ) -> (usize, usize, T) {
        let ht = state.template_features.height;
        let wt = state.template_features.width;
        let y_lo = 0usize;
        let y_hi = map.height.saturating_sub(ht).min(map.height - 1);
        let x_lo = 0usize;
        let x_hi = map.width.saturating_sub(wt).min(map.width - 1);
        let mut best = (y_lo, x_lo, T::neg_infinity());
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let v = map.get(y, x);
                if v > best.2 {
                    best = (y, x, v);
                }
            }
        }
        best
    }

    fn locate_map(
        &self,
        state: &DroneTrackerState<T>,
        map: &ResponseMap<T>,
        ctx: &SearchContext,
    ) -> LocatedBox {
        let ht = state.template_features.height as f64;
        let wt = state.template_features.width as f64;
        let hs = map.height as f64;
        let ws = map.width as f64;
        let d0y = (hs - ht) / 2.0;
        let d0x = (ws - wt) / 2.0;

        let (pr, pc, peak) = self.constrained_peak(state, map);
        let (sub_y, sub_x) = subcell_offset(map, pr, pc);
        let dy = pr as f64 + sub_y - d0y;
        let dx = pc as f64 + sub_x - d0x;
        let ry = d0y.max(0.0);
        let rx = d0x.max(0.0);
        // a peak on the edge of the valid window means the target may lie
        // outside the crop
        let border = (ry > 0.0 && dy.abs() >= ry - 0.5) || (rx > 0.0 && dx.abs() >= rx - 0.5);

        let cell = self.cfg.cell_size as f64;
        let px_x = ctx.region_w / ctx.out_w as f64;
        let px_y = ctx.region_h / ctx.out_h as f64;
        let new_cx = ctx.center.0 + dx * cell * px_x;
        let new_cy = ctx.center.1 + dy * cell * px_y;
        let scale = state.current_scale * ctx.scale_step;
        let bbox = BoundingBox::centered_at(
            new_cx,
            new_cy,
            state.initial_box.w * scale,
            state.initial_box.h * scale,
        );
        LocatedBox {
            bbox,
            score: peak.to_f64_lossy(),
            scale,
            border,
        }
    }

    /// Track a whole single-view sequence from a first-frame annotation.
    /// A frame that fails records the previous box with score 0.
    pub fn track_sequence(&self, frames: &[Frame], gt0: &BoundingBox) -> Result<Trajectory> {
        if frames.is_empty() {
            return Err(Error::Parameter(
                "track_sequence needs at least one frame".into(),
            ));
        }
        let mut state = self.init_tracker(&frames[0], gt0, 0)?;
        let mut traj = Trajectory::default();
        // solve the transforms first so the frame-0 score lives on the same
        // scale as every later score (the raw identity-transform response
        // runs ~2x higher and would distort the loss statistics)
        self.update_transforms(&mut state, &frames[0])?;
        let resp0 = self.compute_own_response(&state, &frames[0])?;
        let score0 = self.locate(&state, &resp0).score;
        traj.push(*gt0, score0, None);
        state.score_history.push(T::from_f64_lossy(score0));
        state.frame_index = 0;

        for frame in &frames[1..] {
            match self.step_view(&state, frame, None) {
                Ok(step) => {
                    traj.push(step.bbox, step.score, None);
                    self.commit_view_step(&mut state, frame, &step)?;
                }
                Err(_) => {
                    traj.push(state.current_box, 0.0, None);
                    state.frame_index += 1;
                }
            }
        }
        Ok(traj)
    }

    /// One tracking step for one view: scale search, optional cross-view
    /// fusion, localization, and the re-detection pass. Does not mutate the
    /// state; pair with [`Self::commit_view_step`].
    pub(crate) fn step_view(
        &self,
        state: &DroneTrackerState<T>,
        frame: &Frame,
        cross: Option<CrossInput<'_, T>>,
    ) -> Result<ViewStepResult<T>> {
        let own_adapted;
        let (own_features, own_index) = match &cross {
            Some(c) => (&c.templates[c.own_index], c.own_index),
            None => {
                own_adapted = self.adapted_template(state)?;
                (&own_adapted, 0)
            }
        };

        let (best, sf) = self.scale_search(state, &own_features.features, frame)?;

        let (fused_map, weights) = match &cross {
            Some(c) if c.templates.len() > 1 => {
                let suppressed = sf
                    .suppressed
                    .as_ref()
                    .expect("normal search path carries suppressed features");
                let mut maps = Vec::with_capacity(c.templates.len());
                for (v, tpl) in c.templates.iter().enumerate() {
                    let map = if v == own_index {
                        best.map.clone()
                    } else {
                        correlate(&tpl.features, suppressed)?
                    };
                    if self.cfg.normalize_templates {
                        maps.push(map.scaled(T::one() / tpl.norm));
                    } else {
                        maps.push(map);
                    }
                }
                // candidate-target features at each map's peak form the design
                let mut candidates = Vec::with_capacity(maps.len());
                for map in &maps {
                    let loc = self.locate_map(state, map, &best.ctx);
                    let patch = extract_patch(frame, &loc.bbox, 1.0, self.cfg.template_size)?;
                    candidates.push(self.extractor.embed(&patch)?);
                }
                let u = fusion::learn_fusion_weights(
                    &candidates,
                    &own_features.features,
                    T::from_f64_lossy(self.cfg.lambda_u),
                )?;
                let fused = fusion::fuse_responses(&maps, &u)?;
                (fused, u.into_vec())
            }
            _ => {
                let mut weights = vec![T::zero(); cross.as_ref().map_or(1, |c| c.templates.len())];
                weights[own_index] = T::one();
                (best.map.clone(), weights)
            }
        };

        let located = self.locate_map(state, &fused_map, &best.ctx);
        let mut bbox = located.bbox;
        let mut score = located.score;
        let mut scale = located.scale;
        let mut redetected = false;
        let mut lost = false;

        if self.cfg.redetect.enabled {
            let hist = &state.score_history;
            let lambda = T::from_f64_lossy(self.cfg.redetect.lambda);
            let omega = if hist.is_empty() {
                T::neg_infinity()
            } else {
                threshold(hist, lambda)?
            };
            let t_abs = if hist.is_empty() {
                T::neg_infinity()
            } else {
                T::from_f64_lossy(self.cfg.redetect.t_score) * hist.running_max()
            };
            let triggered = state.lost
                || located.border
                || (!hist.is_empty() && should_redetect(T::from_f64_lossy(score), omega, t_abs));
            if triggered {
                // a real re-acquisition must also look like the target at
                // its best, or a lenient post-loss ω would accept background
                let floor = if hist.is_empty() {
                    t_abs
                } else {
                    t_abs.max(
                        T::from_f64_lossy(self.cfg.redetect.recovery_frac) * hist.running_max(),
                    )
                };
                match self.redetect_pass(state, frame, &own_features.features, omega, floor)? {
                    Some(rec) => {
                        // a recovery landing on the current box means the
                        // trigger was spurious; adopting it (and clearing
                        // the history) would blind the next real loss
                        let (cx0, cy0) = bbox.center();
                        let (cx1, cy1) = rec.bbox.center();
                        let dist = ((cx1 - cx0).powi(2) + (cy1 - cy0).powi(2)).sqrt();
                        if dist > 0.25 * bbox.w.min(bbox.h) {
                            bbox = rec.bbox;
                            score = rec.score;
                            scale = rec.scale;
                            redetected = true;
                        }
                    }
                    None => lost = true,
                }
            }
        }

        Ok(ViewStepResult {
            bbox,
            score,
            scale,
            weights,
            redetected,
            lost,
        })
    }

    /// Local-to-global recovery: enlarge the search region step by step
    /// (then the whole frame), find the strongest raw-correlation peak, and
    /// re-score that candidate location through the normal windowed,
    /// suppressed pipeline. Acceptance compares the re-scored peak against
    /// the ω threshold and the absolute floor, so recovery scores live on
    /// the same scale as the history that feeds ω. Expanded searches
    /// correlate the adapted template against raw (unwindowed,
    /// unsuppressed) features: the window would bias against off-center
    /// recoveries and the suppression transform is bound to the default
    /// search geometry.
    fn redetect_pass(
        &self,
        state: &DroneTrackerState<T>,
        frame: &Frame,
        adapted: &FeatureMap<T>,
        omega: T,
        t_abs: T,
    ) -> Result<Option<LocatedBox>> {
        let rcfg = &self.cfg.redetect;
        for step in 1..=rcfg.max_expansions + 1 {
            let geom = expand_search(
                state.initial_box.w * state.current_scale,
                state.initial_box.h * state.current_scale,
                frame.width,
                frame.height,
                self.cfg.pad_factor,
                step,
                rcfg,
            );
            let center = state.current_box.center();
            let sf = self.prepare_search(
                state,
                frame,
                center,
                1.0,
                geom.pad_factor,
                geom.full_frame,
                false,
            )?;
            let resp = correlate(adapted, &sf.feats)?;
            let candidate = self.locate_map(state, &resp, &sf.ctx);

            // normal-mode pass centered on the candidate
            let confirm = self.prepare_search(
                state,
                frame,
                candidate.bbox.center(),
                1.0,
                self.cfg.pad_factor,
                false,
                true,
            )?;
            let suppressed = confirm.suppressed.as_ref().expect("normal path");
            let map = correlate(adapted, suppressed)?;
            let refined = self.locate_map(state, &map, &confirm.ctx);
            let score = T::from_f64_lossy(refined.score);
            if score >= omega && score >= t_abs && !refined.border {
                return Ok(Some(refined));
            }
        }
        Ok(None)
    }

    /// Record a step into the state: score history, box, scale, frame
    /// counter, and the end-of-frame transform refresh. A lost view keeps
    /// its transforms frozen so the template does not adapt to whatever
    /// content sits at the stale box.
    pub(crate) fn commit_view_step(
        &self,
        state: &mut DroneTrackerState<T>,
        frame: &Frame,
        step: &ViewStepResult<T>,
    ) -> Result<()> {
        if step.redetected {
            state.score_history.clear();
        }
        state.score_history.push(T::from_f64_lossy(step.score));
        state.current_box = step.bbox;
        state.current_scale = step.scale;
        state.frame_index += 1;
        state.lost = step.lost;
        if step.lost {
            return Ok(());
        }
        self.update_transforms(state, frame)
    }

    /// Best penalized response over the scale set; ties keep the earlier
    /// step, so the result is deterministic.
    pub(crate) fn scale_search(
        &self,
        state: &DroneTrackerState<T>,
        adapted: &FeatureMap<T>,
        frame: &Frame,
    ) -> Result<(ScaledResponse<T>, SearchFeatures<T>)> {
        let penalty = T::from_f64_lossy(self.cfg.scale_penalty);
        let mut best: Option<(ScaledResponse<T>, SearchFeatures<T>)> = None;
        for &step in &self.cfg.scale_steps {
            let center = state.current_box.center();
            let sf =
                self.prepare_search(state, frame, center, step, self.cfg.pad_factor, false, true)?;
            let suppressed = sf.suppressed.as_ref().expect("normal path");
            let map = correlate(adapted, suppressed)?;
            let (_, _, in_range_peak) = self.constrained_peak(state, &map);
            let mut penalized = in_range_peak;
            if step != 1.0 {
                penalized *= penalty;
            }
            let candidate = ScaledResponse {
                map,
                ctx: sf.ctx,
                penalized_peak: penalized,
            };
            match &best {
                Some((b, _)) if b.penalized_peak >= penalized => {}
                _ => best = Some((candidate, sf)),
            }
        }
        Ok(best.expect("scale_steps validated non-empty"))
    }

    /// Extract and embed a search region. The normal path (default pad,
    /// box-centered) uses the exact configured search size so the cached
    /// window and the suppression transform line up; expanded paths derive
    /// their output size from the region so pixel resolution stays constant.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn prepare_search(
        &self,
        state: &DroneTrackerState<T>,
        frame: &Frame,
        center: (f64, f64),
        scale_step: f64,
        pad: f64,
        full_frame: bool,
        windowed: bool,
    ) -> Result<SearchFeatures<T>> {
        let tw = state.initial_box.w * state.current_scale * scale_step;
        let th = state.initial_box.h * state.current_scale * scale_step;
        let tp = self.cfg.template_size as f64;
        let cell = self.cfg.cell_size;

        let (center, region_w, region_h) = if full_frame {
            (
                (frame.width as f64 / 2.0, frame.height as f64 / 2.0),
                frame.width as f64,
                frame.height as f64,
            )
        } else {
            (center, pad * tw, pad * th)
        };

        let (out_w, out_h) = if !full_frame && pad == self.cfg.pad_factor {
            let s = self.cfg.search_size();
            (s, s)
        } else {
            let round_cells = |px: f64| -> usize {
                let raw = (px.round() as usize).max(cell);
                raw.div_ceil(cell) * cell
            };
            (
                round_cells(region_w * tp / tw),
                round_cells(region_h * tp / th),
            )
        };

        let region_box = BoundingBox::centered_at(center.0, center.1, region_w, region_h);
        let patch = extract_patch_rect(frame, &region_box, 1.0, out_w, out_h)?;
        let mut feats = self.extractor.embed(&patch)?;
        let ctx = SearchContext {
            center,
            region_w,
            region_h,
            out_w,
            out_h,
            scale_step,
        };

        let suppressed = if windowed {
            feats.apply_mask(&self.window)?;
            // The learned suppression filter is applied through its per-bin
            // gain magnitudes only. Its phases are fit residue from
            // approximating a non-shift-invariant weighting with a circulant
            // operator; applied literally they shift response peaks onto
            // background structure and the tracker locks there. Zero-phase
            // application keeps the learned spectral emphasis and cannot
            // move peaks.
            Some(zero_phase_filter(&state.suppression_transform, &feats)?)
        } else {
            None
        };
        Ok(SearchFeatures {
            feats,
            suppressed,
            ctx,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic textured frame with a distinct textured target pasted
    /// at integer position (tx, ty). Hash-based noise textures have full
    /// spectral support, unlike modular patterns.
    fn hash_px(x: usize, y: usize, salt: u64) -> u64 {
        let mut z = (x as u64)
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add((y as u64).wrapping_mul(0xbf58476d1ce4e5b9))
            ^ salt;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn scene(w: usize, h: usize, tx: usize, ty: usize, tw: usize, th: usize, bright: f64) -> Frame {
        let bg = |x: usize, y: usize| (60 + hash_px(x, y, 0xb6) % 97) as u8;
        let tex = |x: usize, y: usize| (100 + hash_px(x, y, 0x7a26) % 156) as u8;
        let mut pixels = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                pixels[y * w + x] = bg(x, y);
            }
        }
        for y in 0..th {
            for x in 0..tw {
                let v = (tex(x, y) as f64 * bright).round().clamp(0.0, 255.0) as u8;
                pixels[(ty + y) * w + (tx + x)] = v;
            }
        }
        Frame::new(w, h, 1, pixels, 0).unwrap()
    }

    fn engine() -> TrackerEngine<f64> {
        let mut cfg = TrackerConfig::default();
        cfg.redetect.enabled = false;
        TrackerEngine::new(cfg).unwrap()
    }

    #[test]
    fn init_shapes_and_determinism() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let a = eng.init_tracker(&frame, &gt, 0).unwrap();
        let b = eng.init_tracker(&frame, &gt, 0).unwrap();
        assert_eq!(a, b);
        let f = &a.template_features;
        assert_eq!((f.height, f.width, f.channels), (32, 32, 4));
        assert_eq!(a.suppression_transform.height, 64);
        assert_eq!(a.current_scale, 1.0);
    }

    #[test]
    fn init_rejects_degenerate_box() {
        let frame = scene(64, 64, 0, 0, 8, 8, 1.0);
        let bad = BoundingBox {
            x: 1.0,
            y: 1.0,
            w: 0.0,
            h: 4.0,
        };
        let eng = engine();
        assert!(matches!(
            eng.init_tracker(&frame, &bad, 0),
            Err(Error::InvalidBox(_))
        ));
    }

    #[test]
    fn fresh_template_peaks_at_zero_displacement() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let state = eng.init_tracker(&frame, &gt, 0).unwrap();

        // raw correlation of the identity-adapted template against the
        // unweighted search crop around the target
        let adapted = eng.adapted_template(&state).unwrap();
        let patch = extract_patch(&frame, &gt, 2.0, 128).unwrap();
        let feats: FeatureMap<f64> = eng.extractor.embed(&patch).unwrap();
        let resp = correlate(&adapted.features, &feats).unwrap();
        assert_eq!(resp.peak_pos, (16, 16)); // (64-32)/2 = zero displacement
    }

    #[test]
    fn static_frame_recovers_init_box() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let state = eng.init_tracker(&frame, &gt, 0).unwrap();
        let resp = eng.compute_own_response(&state, &frame).unwrap();
        // peak lands on the zero-displacement bin; the sub-cell fit may add
        // a fraction of a cell
        assert_eq!(resp.map.peak_pos, (16, 16));
        let loc = eng.locate(&state, &resp);
        assert!((loc.bbox.x - gt.x).abs() <= 1.25, "x {}", loc.bbox.x);
        assert!((loc.bbox.y - gt.y).abs() <= 1.25, "y {}", loc.bbox.y);
        assert_eq!(loc.scale, 1.0);
        assert!(!loc.border);
    }

    #[test]
    fn translation_moves_the_peak_by_the_shift() {
        let f0 = scene(320, 240, 100, 80, 64, 64, 1.0);
        let f1 = scene(320, 240, 108, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let mut state = eng.init_tracker(&f0, &gt, 0).unwrap();
        eng.update_transforms(&mut state, &f0).unwrap();

        let resp = eng.compute_own_response(&state, &f1).unwrap();
        let loc = eng.locate(&state, &resp);
        let (cx, _) = loc.bbox.center();
        let (gx, _) = gt.center();
        assert!(
            (cx - (gx + 8.0)).abs() <= 2.0,
            "recovered center {cx}, expected ~{}",
            gx + 8.0
        );
    }

    #[test]
    fn locate_coordinate_arithmetic() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let state = eng.init_tracker(&frame, &gt, 0).unwrap();

        // synthetic response: peak one cell right of zero displacement
        let mut values = vec![0.0f64; 64 * 64];
        values[16 * 64 + 17] = 1.0;
        let map = ResponseMap::new(64, 64, values);
        let ctx = SearchContext {
            center: gt.center(),
            region_w: 128.0,
            region_h: 128.0,
            out_w: 128,
            out_h: 128,
            scale_step: 1.0,
        };
        let loc = eng.locate_map(&state, &map, &ctx);
        let (cx, cy) = loc.bbox.center();
        let (gx, gy) = gt.center();
        assert!((cx - (gx + 2.0)).abs() < 1e-9);
        assert!((cy - gy).abs() < 1e-9);

        // peak at zero displacement leaves the center unchanged
        let mut values = vec![0.0f64; 64 * 64];
        values[16 * 64 + 16] = 1.0;
        let map = ResponseMap::new(64, 64, values);
        let loc = eng.locate_map(&state, &map, &ctx);
        assert!((loc.bbox.center().0 - gx).abs() < 1e-9);

        // chosen scale multiplies the box dimensions
        let ctx_scaled = SearchContext {
            scale_step: 1.025,
            ..ctx
        };
        let loc = eng.locate_map(&state, &map, &ctx_scaled);
        assert!((loc.bbox.w - 64.0 * 1.025).abs() < 1e-9);
        assert!((loc.scale - 1.025).abs() < 1e-12);
    }

    /// Mean-pooled grayscale without the zero-mean shift, so feature maps
    /// keep a nonzero DC bin and the unregularized solve stays well-posed.
    struct RawGrayExtractor;

    impl FeatureExtractor<f64> for RawGrayExtractor {
        fn cell_size(&self) -> usize {
            2
        }
        fn channels(&self) -> usize {
            1
        }
        fn kind(&self) -> &'static str {
            "raw-gray"
        }
        fn embed(&self, patch: &Frame) -> crate::Result<FeatureMap<f64>> {
            let cs = self.cell_size();
            let (fw, fh) = (patch.width / cs, patch.height / cs);
            let mut out = FeatureMap::zeros(fh, fw, 1);
            for cy in 0..fh {
                for cx in 0..fw {
                    let mut acc = 0.0;
                    for iy in 0..cs {
                        for ix in 0..cs {
                            acc += patch.luma_at((cx * cs + ix) as i64, (cy * cs + iy) as i64);
                        }
                    }
                    out.set(cy, cx, 0, acc / (cs * cs) as f64 + 0.05);
                }
            }
            Ok(out)
        }
    }

    #[test]
    fn identical_target_with_zero_lambda_gives_impulse_transform() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let mut cfg = TrackerConfig::default();
        cfg.lambda_m = 0.0;
        cfg.redetect.enabled = false;
        let eng = TrackerEngine::with_extractor(cfg, Arc::new(RawGrayExtractor)).unwrap();
        let mut state = eng.init_tracker(&frame, &gt, 0).unwrap();
        eng.update_transforms(&mut state, &frame).unwrap();
        let delta: FeatureMap<f64> = FeatureMap::impulse(32, 32, 1);
        for (got, want) in state
            .variation_transform
            .values()
            .iter()
            .zip(delta.values())
        {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_frame_keeps_transforms_finite() {
        let frame = Frame::constant(320, 240, 90);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let mut state = eng.init_tracker(&frame, &gt, 0).unwrap();
        eng.update_transforms(&mut state, &frame).unwrap();
        assert!(state
            .variation_transform
            .values()
            .iter()
            .all(|v| v.is_finite()));
        assert!(state
            .suppression_transform
            .values()
            .iter()
            .all(|v| v.is_finite()));
    }

    #[test]
    fn adapted_template_beats_raw_on_brightened_target() {
        // +20% brightness clips the texture's highlights, so the feature
        // change is not a pure rescale and adaptation has something to fit
        let f0 = scene(320, 240, 100, 80, 64, 64, 1.0);
        let f1 = scene(320, 240, 100, 80, 64, 64, 1.2);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let raw_state = eng.init_tracker(&f0, &gt, 0).unwrap();

        // adapt only the variation transform toward the bright appearance,
        // holding the suppression transform fixed to isolate its effect
        let mut adapted_state = raw_state.clone();
        let bright_patch = extract_patch(&f1, &gt, 1.0, eng.cfg.template_size).unwrap();
        let f_bright = eng.extractor.embed(&bright_patch).unwrap();
        adapted_state.variation_transform = crate::freqsolve::solve_variation_transform(
            &adapted_state.template_features,
            &f_bright,
            eng.cfg.lambda_m,
        )
        .unwrap();

        let raw = eng
            .compute_own_response(&raw_state, &f1)
            .unwrap()
            .map
            .peak_value;
        let adapted = eng
            .compute_own_response(&adapted_state, &f1)
            .unwrap()
            .map
            .peak_value;
        assert!(
            adapted > raw,
            "adapted {adapted} should exceed raw {raw} on the brightened target"
        );
    }

    #[test]
    fn single_frame_sequence_returns_the_annotation() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let traj = eng.track_sequence(&[frame], &gt).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.entries[0].bbox, gt);
        assert!(traj.entries[0].score > 0.0);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let frames: Vec<Frame> = (0..6)
            .map(|i| scene(320, 240, 100 + 2 * i, 80 + i, 64, 64, 1.0))
            .collect();
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let a = eng.track_sequence(&frames, &gt).unwrap();
        let b = eng.track_sequence(&frames, &gt).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn static_scene_is_a_fixed_point() {
        let frame = scene(320, 240, 100, 80, 64, 64, 1.0);
        let frames = vec![frame.clone(), frame.clone(), frame.clone(), frame];
        let gt = BoundingBox::new(100.0, 80.0, 64.0, 64.0).unwrap();
        let eng = engine();
        let traj = eng.track_sequence(&frames, &gt).unwrap();
        for e in &traj.entries {
            assert!((e.bbox.x - gt.x).abs() <= 1.25);
            assert!((e.bbox.y - gt.y).abs() <= 1.25);
            assert!((e.bbox.w - gt.w).abs() < 1e-6);
        }
    }

    #[test]
    fn response_peak_tie_breaks_row_major() {
        let values = vec![3.0f64, 3.0, 1.0, 3.0];
        let map = ResponseMap::new(2, 2, values);
        assert_eq!(map.peak_pos, (0, 0));
        assert_eq!(map.peak_value, 3.0);
    }
}
