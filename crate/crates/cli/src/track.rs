//! `mvtrack track`: run the tracker over dataset groups and persist one
//! results file per group. Parallelism is across groups only; each group's
//! frame loop is strictly sequential, so worker count never changes the
//! output bytes.

use crate::TrackArgs;
use anyhow::{Context, Result};
use mvtrack_core::config::TrackerConfig;
use mvtrack_core::dataio::{load_group, save_results, GroupSequence};
use mvtrack_core::fusion::{init_group, step_group};
use mvtrack_core::imaging::Frame;
use mvtrack_core::tracker::{TrackerEngine, Trajectory};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub fn run(args: &TrackArgs) -> Result<bool> {
    let mut cfg = if let Some(preset) = &args.preset {
        TrackerConfig::ablation_preset(preset)
            .ok_or_else(|| anyhow::anyhow!("unknown preset `{preset}`"))?
    } else if let Some(path) = &args.config {
        TrackerConfig::from_file(path).context("loading tracker config")?
    } else {
        TrackerConfig::default()
    };
    if args.no_redetect {
        cfg.redetect.enabled = false;
    }
    if args.no_sharing {
        cfg.sharing = false;
    }
    if args.no_view_fusion {
        cfg.view_fusion = false;
    }
    cfg.validate().context("tracker config")?;

    let filter = crate::parse_group_filter(&args.groups);
    let groups = crate::discover_groups(&args.dataset, &filter)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    // the seed participates in the fingerprint so reruns are attributable
    let fingerprint = format!("{}-s{}", cfg.fingerprint(), args.seed);
    let workers = args.workers.max(1);

    let next = AtomicUsize::new(0);
    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(groups.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= groups.len() {
                    break;
                }
                let path = &groups[i];
                match track_one_group(path, &cfg, &fingerprint, &args.out) {
                    Ok(stats) => println!(
                        "group {}: {} views x {} frames in {:.2}s tracking time ({:.1} FPS)",
                        stats.group_id,
                        stats.views,
                        stats.frames,
                        stats.tracking_time.as_secs_f64(),
                        stats.fps
                    ),
                    Err(err) => {
                        let id = path.display().to_string();
                        eprintln!("group {id}: FAILED: {err:#}");
                        failures.lock().unwrap().push(id);
                    }
                }
            });
        }
    });

    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        eprintln!(
            "{} group(s) failed: {}",
            failures.len(),
            failures.join(", ")
        );
    }
    Ok(failures.is_empty())
}

pub struct GroupRunStats {
    pub group_id: String,
    pub views: usize,
    pub frames: usize,
    /// Time spent in the tracking loop only (image decoding excluded).
    pub tracking_time: Duration,
    pub fps: f64,
}

pub fn track_one_group(
    group_path: &Path,
    cfg: &TrackerConfig,
    fingerprint: &str,
    out_dir: &Path,
) -> Result<GroupRunStats> {
    let seq = load_group(group_path).context("loading group")?;
    let engine: TrackerEngine<f64> = TrackerEngine::new(cfg.clone())?;
    let (trajs, tracking_time) = track_group_streaming(&engine, &seq)?;

    let out_path = out_dir.join(format!("{}.txt", seq.group_id));
    save_results(&trajs, &seq.group_id, fingerprint, &out_path).context("writing results")?;

    let frames = seq.frame_count();
    Ok(GroupRunStats {
        group_id: seq.group_id.clone(),
        views: seq.view_count(),
        frames,
        tracking_time,
        fps: frames as f64 / tracking_time.as_secs_f64().max(1e-9),
    })
}

/// Drive one group frame by frame, decoding images outside the timed
/// tracking sections.
pub fn track_group_streaming(
    engine: &TrackerEngine<f64>,
    seq: &GroupSequence,
) -> Result<(Vec<Trajectory>, Duration)> {
    let v = seq.view_count();
    let n = seq.frame_count();
    let gt0 = seq.initial_boxes()?;

    let load_frames = |t: usize| -> Result<Vec<Frame>> {
        (0..v)
            .map(|k| {
                seq.load_frame(k, t)
                    .with_context(|| format!("view {} frame {}", k + 1, t))
            })
            .collect()
    };

    let mut tracking_time = Duration::ZERO;
    let first = load_frames(0)?;
    let t0 = Instant::now();
    let (mut group, step0) = init_group(engine, &first, &gt0)?;
    tracking_time += t0.elapsed();

    let mut trajs = vec![Trajectory::default(); v];
    for k in 0..v {
        trajs[k].push(
            step0.per_view_boxes[k],
            step0.per_view_scores[k],
            Some(step0.selected_view),
        );
    }
    for t in 1..n {
        let frames = load_frames(t)?;
        let t0 = Instant::now();
        let step = step_group(engine, &mut group, &frames)?;
        tracking_time += t0.elapsed();
        for k in 0..v {
            trajs[k].push(
                step.per_view_boxes[k],
                step.per_view_scores[k],
                Some(step.selected_view),
            );
        }
    }
    Ok((trajs, tracking_time))
}
