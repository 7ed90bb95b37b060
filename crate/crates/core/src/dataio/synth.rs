//! Synthetic multi-view sequence generator.
//!
//! Renders a seeded textured target moving over a seeded textured
//! background, one stream per view. Views differ by an affine placement of
//! the target path; occlusion windows overdraw the target fully or by half,
//! and illumination drift scales frame intensity over time. Ground truth is
//! the exact rendered box. Everything is a pure function of the config, so
//! the generator doubles as the test oracle for the tracking stack.

use super::{load_group, AttributeSet, GroupSequence};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionKind {
    /// Target fully overdrawn by background.
    Full,
    /// Left half of the target overdrawn.
    Half,
}

/// Inclusive frame window during which a view's target is occluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OcclusionWindow {
    pub start: usize,
    pub end: usize,
    pub kind: OcclusionKind,
}

/// Per-view scene parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSynthConfig {
    /// Linear part of the view transform applied to the base target path,
    /// row-major [a, b, c, d].
    pub affine: [f64; 4],
    /// Translation added after the linear part.
    pub offset: (f64, f64),
    /// Total fractional intensity change across the sequence (linear ramp).
    pub illum_drift: f64,
    pub occlusions: Vec<OcclusionWindow>,
}

impl Default for ViewSynthConfig {
    fn default() -> Self {
        Self {
            affine: [1.0, 0.0, 0.0, 1.0],
            offset: (0.0, 0.0),
            illum_drift: 0.0,
            occlusions: Vec::new(),
        }
    }
}

/// Full scene description; the seed fixes every random choice.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub group_id: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub target_w: usize,
    pub target_h: usize,
    /// Base path start, in target-center coordinates.
    pub start: (f64, f64),
    /// Base path velocity in pixels per frame.
    pub velocity: (f64, f64),
    /// Optional instantaneous displacement at a frame index.
    pub jump: Option<(usize, f64, f64)>,
    /// Additive uniform pixel noise amplitude (8-bit scale).
    pub noise: f64,
    pub seed: u64,
    pub views: Vec<ViewSynthConfig>,
    pub attributes: AttributeSet,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Parameter("scene needs at least one view".into()));
        }
        if self.frames == 0 {
            return Err(Error::Parameter("scene needs at least one frame".into()));
        }
        if self.width < 32 || self.height < 32 {
            return Err(Error::Parameter("frame must be at least 32x32".into()));
        }
        if self.target_w < 4 || self.target_h < 4 {
            return Err(Error::Parameter("target must be at least 4x4".into()));
        }
        if self.noise < 0.0 {
            return Err(Error::Parameter("noise must be >= 0".into()));
        }
        for (k, v) in self.views.iter().enumerate() {
            for o in &v.occlusions {
                if o.start > o.end || o.end >= self.frames {
                    return Err(Error::Parameter(format!(
                        "view {k}: occlusion window {}..{} outside 0..{}",
                        o.start,
                        o.end,
                        self.frames - 1
                    )));
                }
            }
        }
        self.attributes.validate()
    }

    /// Named scenario presets used throughout the test suite.
    pub fn fixture(name: &str, seed: u64) -> Result<SynthConfig> {
        let group_id = format!("{name}_s{seed}");
        let cfg = match name {
            "static" => SynthConfig {
                group_id,
                width: 320,
                height: 240,
                frames: 50,
                target_w: 64,
                target_h: 64,
                start: (132.0, 112.0),
                velocity: (0.0, 0.0),
                jump: None,
                noise: 0.0,
                seed,
                views: vec![ViewSynthConfig::default()],
                attributes: AttributeSet::of(&["DAY"])?,
            },
            "linear_motion" => SynthConfig {
                group_id,
                width: 640,
                height: 360,
                frames: 200,
                target_w: 40,
                target_h: 40,
                start: (80.0, 100.0),
                velocity: (2.0, 0.5),
                jump: None,
                noise: 2.0,
                seed,
                views: vec![ViewSynthConfig::default()],
                attributes: AttributeSet::of(&["DAY"])?,
            },
            "jump" => SynthConfig {
                group_id,
                width: 640,
                height: 360,
                frames: 80,
                target_w: 40,
                target_h: 40,
                start: (150.0, 150.0),
                velocity: (0.0, 0.0),
                jump: Some((40, 60.0, 0.0)),
                noise: 1.0,
                seed,
                views: vec![ViewSynthConfig::default()],
                attributes: AttributeSet::of(&["DAY", "CM"])?,
            },
            "occlusion_one_view" => SynthConfig {
                group_id,
                width: 640,
                height: 360,
                frames: 200,
                target_w: 40,
                target_h: 40,
                start: (100.0, 120.0),
                velocity: (1.5, 0.4),
                jump: None,
                noise: 1.0,
                seed,
                views: vec![
                    ViewSynthConfig {
                        occlusions: vec![OcclusionWindow {
                            start: 30,
                            end: 50,
                            kind: OcclusionKind::Full,
                        }],
                        ..ViewSynthConfig::default()
                    },
                    ViewSynthConfig {
                        offset: (25.0, 12.0),
                        occlusions: vec![OcclusionWindow {
                            start: 120,
                            end: 160,
                            kind: OcclusionKind::Full,
                        }],
                        ..ViewSynthConfig::default()
                    },
                ],
                attributes: AttributeSet::of(&["DAY", "FOC"])?,
            },
            "illumination_drift" => SynthConfig {
                group_id,
                width: 640,
                height: 360,
                frames: 120,
                target_w: 40,
                target_h: 40,
                start: (90.0, 90.0),
                velocity: (1.0, 0.2),
                jump: None,
                noise: 1.0,
                seed,
                views: vec![
                    ViewSynthConfig::default(),
                    ViewSynthConfig {
                        offset: (20.0, 10.0),
                        illum_drift: -0.35,
                        ..ViewSynthConfig::default()
                    },
                ],
                attributes: AttributeSet::of(&["DAY", "IV"])?,
            },
            "two_view_plain" => SynthConfig {
                group_id,
                width: 640,
                height: 360,
                frames: 60,
                target_w: 48,
                target_h: 48,
                start: (100.0, 100.0),
                velocity: (1.5, 0.5),
                jump: None,
                noise: 1.0,
                seed,
                views: vec![
                    ViewSynthConfig::default(),
                    ViewSynthConfig {
                        offset: (30.0, 15.0),
                        ..ViewSynthConfig::default()
                    },
                ],
                attributes: AttributeSet::of(&["DAY"])?,
            },
            other => {
                return Err(Error::Parameter(format!(
                    "unknown fixture `{other}`; known: {:?}",
                    Self::fixture_names()
                )))
            }
        };
        Ok(cfg)
    }

    pub fn fixture_names() -> [&'static str; 6] {
        [
            "static",
            "linear_motion",
            "jump",
            "occlusion_one_view",
            "illumination_drift",
            "two_view_plain",
        ]
    }

    /// Parse a scene config file: a `fixture = <name>` preset plus optional
    /// `seed`, `group_id`, `frames`, and `noise` overrides.
    pub fn from_kv_text(text: &str, source: &str) -> Result<SynthConfig> {
        let mut fixture = None;
        let mut seed = 1u64;
        let mut group_id = None;
        let mut frames = None;
        let mut noise = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                file: source.into(),
                line: lineno + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |msg: String| Error::Parse {
                file: source.into(),
                line: lineno + 1,
                msg,
            };
            match key {
                "fixture" => fixture = Some(value.to_string()),
                "seed" => {
                    seed = value
                        .parse()
                        .map_err(|_| bad(format!("invalid seed `{value}`")))?
                }
                "group_id" => group_id = Some(value.to_string()),
                "frames" => {
                    frames = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("invalid frame count `{value}`")))?,
                    )
                }
                "noise" => {
                    noise = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("invalid noise `{value}`")))?,
                    )
                }
                other => return Err(bad(format!("unknown scene key `{other}`"))),
            }
        }
        let fixture = fixture.ok_or_else(|| {
            Error::Config(format!(
                "{source}: scene config needs a `fixture = <name>` line"
            ))
        })?;
        let mut cfg = SynthConfig::fixture(&fixture, seed)?;
        if let Some(g) = group_id {
            cfg.group_id = g;
        }
        if let Some(n) = frames {
            cfg.frames = n;
        }
        if let Some(n) = noise {
            cfg.noise = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<SynthConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_text(&text, &path.display().to_string())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream) ^ splitmix(index)))
}

/// Smooth random texture in [lo, hi]: white noise box-blurred twice.
fn texture(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> Vec<u8> {
    let mut field: Vec<f64> = (0..w * h).map(|_| rng.gen::<f64>()).collect();
    for _ in 0..2 {
        let src = field.clone();
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                let mut cnt = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let yy = y as i64 + dy;
                        let xx = x as i64 + dx;
                        if yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                            acc += src[yy as usize * w + xx as usize];
                            cnt += 1.0;
                        }
                    }
                }
                field[y * w + x] = acc / cnt;
            }
        }
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &field {
        min = min.min(*v);
        max = max.max(*v);
    }
    let span = (max - min).max(1e-12);
    field
        .into_iter()
        .map(|v| {
            (lo + (v - min) / span * (hi - lo))
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect()
}

/// Nearest-neighbor resample of a texture to the per-view target size.
fn resample(tex: &[u8], tw: usize, th: usize, ow: usize, oh: usize) -> Vec<u8> {
    let mut out = vec![0u8; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let sy = (y * th / oh).min(th - 1);
            let sx = (x * tw / ow).min(tw - 1);
            out[y * ow + x] = tex[sy * tw + sx];
        }
    }
    out
}

/// Render a scene to disk and load it back as a [`GroupSequence`].
pub fn synth_group(cfg: &SynthConfig, out_dir: &Path) -> Result<GroupSequence> {
    cfg.validate()?;
    let group_dir = out_dir.join(&cfg.group_id);
    std::fs::create_dir_all(&group_dir)?;

    let (w, h, n) = (cfg.width, cfg.height, cfg.frames);
    let mut target_rng = rng_for(cfg.seed, 0x7a26, 0);
    let base_target = texture(&mut target_rng, cfg.target_w, cfg.target_h, 90.0, 255.0);

    for (k, view) in cfg.views.iter().enumerate() {
        let view_dir = group_dir.join(format!("drone{}", k + 1));
        std::fs::create_dir_all(&view_dir)?;

        let mut bg_rng = rng_for(cfg.seed, 0xb6, k as u64 + 1);
        let background = texture(&mut bg_rng, w, h, 30.0, 150.0);

        let [a, b, c, d] = view.affine;
        let tw = ((cfg.target_w as f64 * a.abs()).round() as usize).max(4);
        let th = ((cfg.target_h as f64 * d.abs()).round() as usize).max(4);
        let target = resample(&base_target, cfg.target_w, cfg.target_h, tw, th);

        let mut gt = String::new();
        let mut occ = String::new();
        for t in 0..n {
            let mut base_cx = cfg.start.0 + cfg.velocity.0 * t as f64;
            let mut base_cy = cfg.start.1 + cfg.velocity.1 * t as f64;
            if let Some((jf, jx, jy)) = cfg.jump {
                if t >= jf {
                    base_cx += jx;
                    base_cy += jy;
                }
            }
            let cx = a * base_cx + b * base_cy + view.offset.0;
            let cy = c * base_cx + d * base_cy + view.offset.1;
            let tlx = (cx - tw as f64 / 2.0).round() as i64;
            let tly = (cy - th as f64 / 2.0).round() as i64;

            let occluded = view
                .occlusions
                .iter()
                .find(|o| t >= o.start && t <= o.end)
                .map(|o| o.kind);

            let mut pixels = background.clone();
            if occluded != Some(OcclusionKind::Full) {
                // half occlusion hides the left half of the target
                let first_col = if occluded == Some(OcclusionKind::Half) {
                    tw / 2
                } else {
                    0
                };
                for ty in 0..th {
                    let fy = tly + ty as i64;
                    if fy < 0 || fy >= h as i64 {
                        continue;
                    }
                    for tx in first_col..tw {
                        let fx = tlx + tx as i64;
                        if fx < 0 || fx >= w as i64 {
                            continue;
                        }
                        pixels[fy as usize * w + fx as usize] = target[ty * tw + tx];
                    }
                }
            }

            let denom = (n as f64 - 1.0).max(1.0);
            let illum = 1.0 + view.illum_drift * t as f64 / denom;
            if view.illum_drift != 0.0 {
                for p in pixels.iter_mut() {
                    *p = (*p as f64 * illum).round().clamp(0.0, 255.0) as u8;
                }
            }
            if cfg.noise > 0.0 {
                let mut rng = rng_for(cfg.seed, 0x401 + k as u64, t as u64);
                for p in pixels.iter_mut() {
                    let d: f64 = rng.gen_range(-cfg.noise..=cfg.noise);
                    *p = (*p as f64 + d).round().clamp(0.0, 255.0) as u8;
                }
            }

            image::save_buffer(
                view_dir.join(format!("img{:06}.png", t + 1)),
                &pixels,
                w as u32,
                h as u32,
                image::ExtendedColorType::L8,
            )?;

            let fully_outside = tlx >= w as i64
                || tly >= h as i64
                || tlx + (tw as i64) <= 0
                || tly + (th as i64) <= 0;
            if fully_outside {
                gt.push_str("NaN,NaN,NaN,NaN\n");
            } else {
                let _ = writeln!(gt, "{tlx:.2},{tly:.2},{tw:.2},{th:.2}");
            }
            occ.push_str(if occluded.is_some() { "1\n" } else { "0\n" });
        }
        std::fs::write(view_dir.join("groundtruth.txt"), gt)?;
        std::fs::write(view_dir.join("occlusion.txt"), occ)?;
    }
    std::fs::write(
        group_dir.join("attributes.txt"),
        cfg.attributes.to_line() + "\n",
    )?;

    load_group(&group_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_renders_identical_bytes() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::fixture("two_view_plain", 7).unwrap();
        let mut small = cfg.clone();
        small.frames = 4;
        let a = synth_group(&small, &tmp.path().join("a")).unwrap();
        let b = synth_group(&small, &tmp.path().join("b")).unwrap();
        for v in 0..2 {
            assert_eq!(a.views[v].ground_truth, b.views[v].ground_truth);
            for f in 0..small.frames {
                let pa = std::fs::read(&a.views[v].frame_paths[f]).unwrap();
                let pb = std::fs::read(&b.views[v].frame_paths[f]).unwrap();
                assert_eq!(pa, pb, "view {v} frame {f}");
            }
        }
    }

    #[test]
    fn static_scene_has_constant_ground_truth() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = SynthConfig::fixture("static", 3).unwrap();
        cfg.frames = 6;
        let seq = synth_group(&cfg, tmp.path()).unwrap();
        let first = seq.views[0].ground_truth[0].unwrap();
        for g in &seq.views[0].ground_truth {
            let g = g.unwrap();
            assert_eq!((g.x, g.y, g.w, g.h), (first.x, first.y, first.w, first.h));
        }
        assert!(seq.views[0].occluded.iter().all(|o| !o));
    }

    #[test]
    fn occlusion_windows_flag_only_their_view() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = SynthConfig::fixture("occlusion_one_view", 5).unwrap();
        cfg.frames = 60;
        cfg.views[1].occlusions.clear(); // isolate the view-1 event
        let seq = synth_group(&cfg, tmp.path()).unwrap();
        for t in 0..60 {
            let expect = (30..=50).contains(&t);
            assert_eq!(seq.views[0].occluded[t], expect, "frame {t}");
            assert!(!seq.views[1].occluded[t]);
        }
        // the target's true box is still annotated during the occlusion
        assert!(seq.views[0].ground_truth[40].is_some());
    }

    #[test]
    fn ground_truth_matches_rendered_pixels() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = SynthConfig::fixture("static", 11).unwrap();
        cfg.frames = 1;
        let seq = synth_group(&cfg, tmp.path()).unwrap();
        let frame = seq.load_frame(0, 0).unwrap();
        let g = seq.views[0].ground_truth[0].unwrap();
        let (gx, gy, gw, gh) = (g.x as usize, g.y as usize, g.w as usize, g.h as usize);

        // the rendered crop at the annotation is the target texture, and a
        // local exhaustive match finds no better placement elsewhere
        let mut target_rng = rng_for(cfg.seed, 0x7a26, 0);
        let tex = texture(&mut target_rng, cfg.target_w, cfg.target_h, 90.0, 255.0);
        let ssd_at = |ox: i64, oy: i64| -> f64 {
            let mut acc = 0.0;
            for y in 0..gh {
                for x in 0..gw {
                    let fy = (gy as i64 + oy) as usize + y;
                    let fx = (gx as i64 + ox) as usize + x;
                    let d = frame.pixels[fy * frame.width + fx] as f64 - tex[y * gw + x] as f64;
                    acc += d * d;
                }
            }
            acc
        };
        assert_eq!(ssd_at(0, 0), 0.0);
        for oy in -12i64..=12 {
            for ox in -12i64..=12 {
                if ox == 0 && oy == 0 {
                    continue;
                }
                assert!(ssd_at(ox, oy) > 0.0, "offset ({ox},{oy}) also matches");
            }
        }
    }

    #[test]
    fn scene_config_parsing() {
        let cfg =
            SynthConfig::from_kv_text("fixture = jump\nseed = 9\nframes = 30\n", "mem").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.frames, 30);
        assert!(cfg.group_id.contains("jump"));

        assert!(SynthConfig::from_kv_text("seed = 2\n", "mem").is_err());
        assert!(SynthConfig::from_kv_text("fixture = nope\n", "mem").is_err());
        assert!(SynthConfig::from_kv_text("fixture = jump\nbogus = 1\n", "mem").is_err());
    }

    #[test]
    fn invalid_occlusion_window_rejected() {
        let mut cfg = SynthConfig::fixture("static", 1).unwrap();
        cfg.views[0].occlusions.push(OcclusionWindow {
            start: 10,
            end: 200,
            kind: OcclusionKind::Full,
        });
        assert!(cfg.validate().is_err());
    }
}
