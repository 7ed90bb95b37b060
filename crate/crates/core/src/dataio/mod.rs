//! Dataset layout, results persistence, and the synthetic sequence
//! generator used as the benchmark oracle.
//!
//! On-disk layout of one multi-view group:
//!
//! ```text
//! <group_id>/
//!   attributes.txt          ten comma-separated 0/1 flags (fixed order)
//!   drone1/
//!     img000001.png|jpg     zero-padded, 1-based frame files
//!     groundtruth.txt       one "x,y,w,h" line per frame;
//!                           "NaN,NaN,NaN,NaN" marks out-of-view frames
//!     occlusion.txt         optional; one 0/1 line per frame
//!   drone2/...
//! ```
//!
//! All text files are ASCII and newline-terminated.

mod results;
mod synth;

pub use results::{save_results, ResultEntry, ResultsFile};
pub use synth::{synth_group, OcclusionKind, OcclusionWindow, SynthConfig, ViewSynthConfig};

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Frame};
use std::path::{Path, PathBuf};

/// Fixed attribute order used by `attributes.txt` and the evaluation
/// breakdown.
pub const ATTRIBUTE_NAMES: [&str; 10] = [
    "DAY", "NIGHT", "CM", "POC", "FOC", "OV", "SO", "VC", "IV", "LR",
];

/// Ten sequence-level condition flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AttributeSet {
    pub flags: [bool; 10],
}

impl AttributeSet {
    /// Build from attribute names, e.g. `AttributeSet::of(&["DAY", "CM"])`.
    pub fn of(names: &[&str]) -> Result<Self> {
        let mut set = AttributeSet::default();
        for name in names {
            let idx = ATTRIBUTE_NAMES
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| Error::UnknownAttribute((*name).into()))?;
            set.flags[idx] = true;
        }
        set.validate()?;
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<bool> {
        let idx = ATTRIBUTE_NAMES
            .iter()
            .position(|a| *a == name)
            .ok_or_else(|| Error::UnknownAttribute(name.into()))?;
        Ok(self.flags[idx])
    }

    /// Daytime and night are mutually exclusive.
    pub fn validate(&self) -> Result<()> {
        if self.flags[0] && self.flags[1] {
            return Err(Error::Parameter(
                "DAY and NIGHT attributes are mutually exclusive".into(),
            ));
        }
        Ok(())
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != ATTRIBUTE_NAMES.len() {
            return Err(Error::Parameter(format!(
                "expected {} attribute flags, got {}",
                ATTRIBUTE_NAMES.len(),
                parts.len()
            )));
        }
        let mut set = AttributeSet::default();
        for (i, p) in parts.iter().enumerate() {
            set.flags[i] = match p.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parameter(format!(
                        "attribute flag must be 0 or 1, got `{other}`"
                    )))
                }
            };
        }
        set.validate()?;
        Ok(set)
    }

    pub fn to_line(&self) -> String {
        self.flags
            .iter()
            .map(|f| if *f { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn set_names(&self) -> Vec<&'static str> {
        ATTRIBUTE_NAMES
            .iter()
            .zip(self.flags.iter())
            .filter(|(_, f)| **f)
            .map(|(n, _)| *n)
            .collect()
    }
}

/// One view's frame files and annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSequence {
    pub frame_paths: Vec<PathBuf>,
    /// Per-frame ground truth; `None` marks the target fully out of view.
    pub ground_truth: Vec<Option<BoundingBox>>,
    /// Per-frame occlusion flags (false when no occlusion file exists).
    pub occluded: Vec<bool>,
}

/// One multi-view recording group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSequence {
    pub group_id: String,
    pub views: Vec<ViewSequence>,
    pub attributes: AttributeSet,
}

impl GroupSequence {
    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn frame_count(&self) -> usize {
        self.views.first().map_or(0, |v| v.frame_paths.len())
    }

    /// Decode one frame of one view.
    pub fn load_frame(&self, view: usize, frame: usize) -> Result<Frame> {
        Frame::load(&self.views[view].frame_paths[frame], frame)
    }

    /// Decode a whole view into memory.
    pub fn load_view_frames(&self, view: usize) -> Result<Vec<Frame>> {
        (0..self.frame_count())
            .map(|i| self.load_frame(view, i))
            .collect()
    }

    /// First-frame annotation of every view; errors if any view starts out
    /// of view.
    pub fn initial_boxes(&self) -> Result<Vec<BoundingBox>> {
        self.views
            .iter()
            .enumerate()
            .map(|(k, v)| {
                v.ground_truth
                    .first()
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::InvalidBox(format!("view {k} has no first-frame box")))
            })
            .collect()
    }
}

fn parse_gt_line(line: &str, file: &str, lineno: usize) -> Result<Option<BoundingBox>> {
    let parts: Vec<&str> = line.trim().split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Parse {
            file: file.into(),
            line: lineno,
            msg: format!("expected 4 comma-separated fields, got {}", parts.len()),
        });
    }
    if parts.iter().all(|p| p.trim().eq_ignore_ascii_case("nan")) {
        return Ok(None);
    }
    let mut vals = [0.0f64; 4];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p.trim().parse().map_err(|_| Error::Parse {
            file: file.into(),
            line: lineno,
            msg: format!("field {} `{}` is not a number", i + 1, p.trim()),
        })?;
    }
    let bbox = BoundingBox::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| Error::Parse {
        file: file.into(),
        line: lineno,
        msg: e.to_string(),
    })?;
    Ok(Some(bbox))
}

fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| {
                        let e = e.to_ascii_lowercase();
                        e == "png" || e == "jpg" || e == "jpeg"
                    })
                    .unwrap_or(false)
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .map(|s| s.starts_with("img"))
                    .unwrap_or(false)
        })
        .collect();
    frames.sort();
    Ok(frames)
}

/// Load a group from the documented directory layout, validating frame
/// synchronization and annotation lengths.
pub fn load_group(path: &Path) -> Result<GroupSequence> {
    let group_id = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Parameter(format!("bad group path {}", path.display())))?
        .to_string();

    let mut view_dirs: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("drone"))
                    .unwrap_or(false)
        })
        .collect();
    view_dirs.sort();
    if view_dirs.is_empty() {
        return Err(Error::Parse {
            file: path.display().to_string(),
            line: 0,
            msg: "no drone* view directories found".into(),
        });
    }

    let mut views = Vec::with_capacity(view_dirs.len());
    for dir in &view_dirs {
        let frame_paths = list_frame_files(dir)?;
        if frame_paths.is_empty() {
            return Err(Error::Parse {
                file: dir.display().to_string(),
                line: 0,
                msg: "view directory contains no img* frames".into(),
            });
        }
        let gt_path = dir.join("groundtruth.txt");
        let gt_name = gt_path.display().to_string();
        let gt_text = std::fs::read_to_string(&gt_path).map_err(|e| Error::Parse {
            file: gt_name.clone(),
            line: 0,
            msg: format!("cannot read ground truth: {e}"),
        })?;
        let ground_truth: Vec<Option<BoundingBox>> = gt_text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| parse_gt_line(l, &gt_name, i + 1))
            .collect::<Result<_>>()?;
        if ground_truth.len() != frame_paths.len() {
            return Err(Error::Parse {
                file: gt_name,
                line: 0,
                msg: format!(
                    "{} ground-truth lines for {} frames",
                    ground_truth.len(),
                    frame_paths.len()
                ),
            });
        }

        let occ_path = dir.join("occlusion.txt");
        let occluded = if occ_path.is_file() {
            let occ_name = occ_path.display().to_string();
            let flags: Vec<bool> = std::fs::read_to_string(&occ_path)?
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| match l.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Parse {
                        file: occ_name.clone(),
                        line: i + 1,
                        msg: format!("occlusion flag must be 0 or 1, got `{other}`"),
                    }),
                })
                .collect::<Result<_>>()?;
            if flags.len() != frame_paths.len() {
                return Err(Error::Parse {
                    file: occ_name,
                    line: 0,
                    msg: format!(
                        "{} occlusion flags for {} frames",
                        flags.len(),
                        frame_paths.len()
                    ),
                });
            }
            flags
        } else {
            vec![false; frame_paths.len()]
        };

        views.push(ViewSequence {
            frame_paths,
            ground_truth,
            occluded,
        });
    }

    let n0 = views[0].frame_paths.len();
    for (k, v) in views.iter().enumerate().skip(1) {
        if v.frame_paths.len() != n0 {
            return Err(Error::Synchronization(format!(
                "view 1 has {n0} frames but view {} has {} in group {group_id}",
                k + 1,
                v.frame_paths.len()
            )));
        }
    }

    let attr_path = path.join("attributes.txt");
    let attributes = if attr_path.is_file() {
        let text = std::fs::read_to_string(&attr_path)?;
        let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        AttributeSet::parse_line(line).map_err(|e| Error::Parse {
            file: attr_path.display().to_string(),
            line: 1,
            msg: e.to_string(),
        })?
    } else {
        AttributeSet::default()
    };

    Ok(GroupSequence {
        group_id,
        views,
        attributes,
    })
}
