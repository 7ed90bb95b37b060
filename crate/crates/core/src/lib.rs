//! Multi-view single-object tracking.
//!
//! The library tracks one target across the synchronized video streams of
//! several cameras ("views"). Each view runs a frequency-domain
//! ridge-regression tracker; views share their target templates, fuse the
//! resulting response maps with self-supervised weights, and the view with
//! the strongest fused response is selected per frame. A score-statistics
//! re-detector widens the search region when the target is judged lost.
//!
//! Numerical kernels are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); pixel geometry (boxes, trajectories, metrics) is plain
//! `f64`. Concrete aliases for the common instantiations live at the crate
//! root.

// grid math throughout reads clearer with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod freqsolve;
pub mod fusion;
pub mod imaging;
pub mod redetect;
pub mod tracker;

pub use error::{Error, Result};

use std::cell::RefCell;
use std::sync::Arc;

/// Scalar type the numerical kernels are generic over.
///
/// Implemented for `f32` and `f64`. The FFT-instance hook routes plan
/// creation through a per-thread cached planner for the concrete type.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + rustfft::FftNum
    + std::iter::Sum<Self>
    + std::fmt::Display
    + Default
{
    /// Cached FFT plan of the given length and direction.
    fn fft_instance(len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<Self>>;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

macro_rules! impl_real {
    ($t:ty, $planner:ident) => {
        impl Real for $t {
            fn fft_instance(len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<Self>> {
                thread_local! {
                    static $planner: RefCell<rustfft::FftPlanner<$t>> =
                        RefCell::new(rustfft::FftPlanner::new());
                }
                $planner.with(|p| {
                    let mut p = p.borrow_mut();
                    if inverse {
                        p.plan_fft_inverse(len)
                    } else {
                        p.plan_fft_forward(len)
                    }
                })
            }
        }
    };
}

impl_real!(f32, PLANNER_F32);
impl_real!(f64, PLANNER_F64);

pub use config::{RedetectConfig, TrackerConfig};
pub use imaging::{BoundingBox, FeatureExtractor, FeatureMap, Frame, GrayGradientExtractor};
pub use tracker::{DroneTrackerState, ResponseMap, Trajectory};

/// Concrete aliases for the default double-precision instantiation.
pub type FeatureMap64 = imaging::FeatureMap<f64>;
pub type Spectrum64 = freqsolve::Spectrum<f64>;
pub type ResponseMap64 = tracker::ResponseMap<f64>;
pub type DroneTrackerState64 = tracker::DroneTrackerState<f64>;
pub type AgentGroupState64 = fusion::AgentGroupState<f64>;
pub type ScoreHistory64 = redetect::ScoreHistory<f64>;

/// Single-precision aliases.
pub type FeatureMap32 = imaging::FeatureMap<f32>;
pub type Spectrum32 = freqsolve::Spectrum<f32>;
pub type ResponseMap32 = tracker::ResponseMap<f32>;
pub type DroneTrackerState32 = tracker::DroneTrackerState<f32>;
pub type AgentGroupState32 = fusion::AgentGroupState<f32>;
pub type ScoreHistory32 = redetect::ScoreHistory<f32>;
