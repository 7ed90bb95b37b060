//! Target-loss detection from peak-score statistics and the local-to-global
//! search expansion used to recover.
//!
//! A ring buffer keeps the last `q` peak scores. The target counts as lost
//! when the current score falls below ω = μ − λ·σ over that buffer, or
//! below an absolute floor derived from the running maximum score. Recovery
//! re-runs the response on a geometrically enlarged search region, stepping
//! up to a full-frame search.

use crate::config::RedetectConfig;
use crate::error::{Error, Result};
use crate::Real;
use std::collections::VecDeque;

/// Ring buffer of the most recent peak scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistory<T: Real> {
    buf: VecDeque<T>,
    capacity: usize,
    running_max: T,
}

impl<T: Real> ScoreHistory<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
            running_max: T::neg_infinity(),
        }
    }

    pub fn push(&mut self, score: T) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(score);
        if score > self.running_max {
            self.running_max = score;
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() == self.capacity
    }

    /// Highest score ever pushed; survives `clear`, so the absolute floor
    /// keeps its sequence-level reference point after a recovery.
    pub fn running_max(&self) -> T {
        self.running_max
    }

    pub fn mean(&self) -> T {
        let n = T::from_f64_lossy(self.buf.len() as f64);
        self.buf.iter().copied().sum::<T>() / n
    }

    /// Population (1/N) standard deviation; defined for a single element.
    pub fn stdev(&self) -> T {
        let mu = self.mean();
        let n = T::from_f64_lossy(self.buf.len() as f64);
        let var = self.buf.iter().map(|s| (*s - mu) * (*s - mu)).sum::<T>() / n;
        var.max(T::zero()).sqrt()
    }

    /// Drop buffered scores (running max is kept).
    pub fn clear(&mut self) {
        self.buf.clear();
    }
}

/// Loss threshold ω = μ − λ·σ over the buffered scores.
pub fn threshold<T: Real>(history: &ScoreHistory<T>, lambda: T) -> Result<T> {
    if history.is_empty() {
        return Err(Error::Parameter(
            "re-detection threshold needs a non-empty score history".into(),
        ));
    }
    Ok(history.mean() - lambda * history.stdev())
}

/// True when the score falls below ω or below the absolute floor.
pub fn should_redetect<T: Real>(score: T, omega: T, t_score: T) -> bool {
    score < omega || score < t_score
}

/// Search geometry for one expansion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpandedSearch {
    /// Effective pad factor after capping against the frame.
    pub pad_factor: f64,
    /// Step exceeded `max_expansions`: search the whole frame instead of a
    /// box-centered region.
    pub full_frame: bool,
}

/// Pad factor for expansion `step`, capped so the region never exceeds the
/// frame. Steps beyond `max_expansions` switch to a full-frame search.
pub fn expand_search(
    target_w: f64,
    target_h: f64,
    frame_w: usize,
    frame_h: usize,
    base_pad: f64,
    step: usize,
    cfg: &RedetectConfig,
) -> ExpandedSearch {
    debug_assert!(step >= 1);
    let cap = (frame_w as f64 / target_w)
        .min(frame_h as f64 / target_h)
        .max(1.0);
    if step > cfg.max_expansions {
        return ExpandedSearch {
            pad_factor: cap,
            full_frame: true,
        };
    }
    let pad = base_pad * cfg.expand_factor.powi(step as i32);
    ExpandedSearch {
        pad_factor: pad.min(cap).max(1.0),
        full_frame: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history_of(scores: &[f64], q: usize) -> ScoreHistory<f64> {
        let mut h = ScoreHistory::new(q);
        for s in scores {
            h.push(*s);
        }
        h
    }

    #[test]
    fn zero_variance_threshold_is_the_mean() {
        let h = history_of(&[0.5, 0.5, 0.5], 5);
        assert_eq!(threshold(&h, 2.0).unwrap(), 0.5);
    }

    #[test]
    fn threshold_matches_direct_arithmetic() {
        // mean 0.5, population stdev 0.1, omega = 0.5 - 2*0.1 = 0.3
        let h = history_of(&[0.4, 0.6], 5);
        let omega = threshold(&h, 2.0).unwrap();
        assert!((omega - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empty_history_is_an_error() {
        let h: ScoreHistory<f64> = ScoreHistory::new(3);
        assert!(matches!(threshold(&h, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn redetect_conditions() {
        assert!(should_redetect(0.2, 0.3, 0.05)); // below omega
        assert!(!should_redetect(0.5, 0.3, 0.05)); // above both
        assert!(should_redetect(0.04, 0.01, 0.05)); // below absolute floor
    }

    #[test]
    fn omega_never_exceeds_mean() {
        let h = history_of(&[0.1, 0.9, 0.4, 0.7], 5);
        for lambda in [0.0, 0.5, 1.0, 2.0] {
            assert!(threshold(&h, lambda).unwrap() <= h.mean() + 1e-15);
        }
    }

    #[test]
    fn lambda_zero_reduces_to_mean_test() {
        let h = history_of(&[0.2, 0.4], 5);
        let omega = threshold(&h, 0.0).unwrap();
        assert!(should_redetect(0.29, omega, 0.0));
        assert!(!should_redetect(0.31, omega, 0.0));
    }

    #[test]
    fn ring_buffer_caps_and_tracks_max() {
        let mut h: ScoreHistory<f64> = ScoreHistory::new(3);
        for s in [1.0, 2.0, 9.0, 3.0, 4.0] {
            h.push(s);
        }
        assert_eq!(h.len(), 3);
        assert!((h.mean() - (9.0 + 3.0 + 4.0) / 3.0).abs() < 1e-12);
        assert_eq!(h.running_max(), 9.0);
        h.clear();
        assert!(h.is_empty());
        assert_eq!(h.running_max(), 9.0);
    }

    #[test]
    fn single_multiplication_step() {
        let cfg = RedetectConfig {
            expand_factor: 1.5,
            max_expansions: 3,
            ..RedetectConfig::default()
        };
        let g = expand_search(40.0, 40.0, 1280, 720, 2.0, 1, &cfg);
        assert!((g.pad_factor - 3.0).abs() < 1e-12);
        assert!(!g.full_frame);
    }

    #[test]
    fn expansion_is_monotone_until_the_cap() {
        let cfg = RedetectConfig::default();
        let mut last = 0.0;
        for step in 1..=cfg.max_expansions {
            let g = expand_search(40.0, 40.0, 640, 360, 2.0, step, &cfg);
            assert!(g.pad_factor >= last);
            last = g.pad_factor;
            // 360/40 = 9.0 is the frame cap
            assert!(g.pad_factor <= 9.0 + 1e-12);
        }
        let g = expand_search(40.0, 40.0, 640, 360, 2.0, cfg.max_expansions + 1, &cfg);
        assert!(g.full_frame);
        assert!((g.pad_factor - 9.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_step_clamps_to_frame() {
        let cfg = RedetectConfig {
            max_expansions: 10,
            ..RedetectConfig::default()
        };
        let g = expand_search(100.0, 100.0, 320, 240, 2.0, 10, &cfg);
        assert!((g.pad_factor - 2.4).abs() < 1e-12);
    }
}
