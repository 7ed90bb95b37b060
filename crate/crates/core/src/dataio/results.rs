//! Results persistence: one text file per tracked group.
//!
//! Format: a single `#`-prefixed header line, then one row per (frame,
//! view) in frame-major order:
//!
//! ```text
//! # group=<id> views=<V> frames=<n> fingerprint=<hex>
//! <frame>,<view>,<x>,<y>,<w>,<h>,<score>,<selected_view>
//! ```
//!
//! Box coordinates are written with exactly two decimal places (and are
//! quantized to that precision when the file is built); scores use the
//! shortest round-trip representation, so `load(save(x)) == x`.

use crate::error::{Error, Result};
use crate::imaging::BoundingBox;
use crate::tracker::Trajectory;
use std::fmt::Write as _;
use std::path::Path;

/// One (view, frame) tracking record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultEntry {
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Parsed results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsFile {
    pub group_id: String,
    pub fingerprint: String,
    /// Indexed `[view][frame]`.
    pub per_view: Vec<Vec<ResultEntry>>,
    /// Selected view per frame.
    pub selected: Vec<usize>,
}

fn quantize2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

impl ResultsFile {
    /// Build from per-view trajectories; box coordinates are quantized to
    /// the file's declared two-decimal precision. The per-frame selection
    /// is taken from the trajectory entries (0 when absent).
    pub fn from_trajectories(
        group_id: &str,
        fingerprint: &str,
        trajectories: &[Trajectory],
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Parameter("results need at least one view".into()));
        }
        let n = trajectories[0].len();
        for (k, t) in trajectories.iter().enumerate() {
            if t.len() != n {
                return Err(Error::Alignment(format!(
                    "view 1 has {n} frames but view {} has {}",
                    k + 1,
                    t.len()
                )));
            }
        }
        let mut selected = Vec::with_capacity(n);
        for i in 0..n {
            let sel = trajectories[0].entries[i].selected_view.unwrap_or(0);
            for (k, t) in trajectories.iter().enumerate() {
                let s = t.entries[i].selected_view.unwrap_or(0);
                if s != sel {
                    return Err(Error::Alignment(format!(
                        "frame {i}: view {} logs selected view {s}, view 1 logs {sel}",
                        k + 1
                    )));
                }
                if s >= trajectories.len() {
                    return Err(Error::Parameter(format!(
                        "frame {i}: selected view {s} out of range"
                    )));
                }
            }
            selected.push(sel);
        }
        let per_view = trajectories
            .iter()
            .map(|t| {
                t.entries
                    .iter()
                    .map(|e| ResultEntry {
                        bbox: BoundingBox {
                            x: quantize2(e.bbox.x),
                            y: quantize2(e.bbox.y),
                            w: quantize2(e.bbox.w),
                            h: quantize2(e.bbox.h),
                        },
                        score: e.score,
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            group_id: group_id.to_string(),
            fingerprint: fingerprint.to_string(),
            per_view,
            selected,
        })
    }

    pub fn view_count(&self) -> usize {
        self.per_view.len()
    }

    pub fn frame_count(&self) -> usize {
        self.selected.len()
    }

    /// Reconstruct per-view trajectories (with the logged selections).
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.per_view
            .iter()
            .map(|entries| {
                let mut t = Trajectory::default();
                for (i, e) in entries.iter().enumerate() {
                    t.push(e.bbox, e.score, Some(self.selected[i]));
                }
                t
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# group={} views={} frames={} fingerprint={}",
            self.group_id,
            self.view_count(),
            self.frame_count(),
            self.fingerprint
        );
        for frame in 0..self.frame_count() {
            for (view, entries) in self.per_view.iter().enumerate() {
                let e = &entries[frame];
                let _ = writeln!(
                    out,
                    "{frame},{view},{:.2},{:.2},{:.2},{:.2},{},{}",
                    e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h, e.score, self.selected[frame]
                );
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &name)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            file: source.into(),
            line: 1,
            msg: "empty results file".into(),
        })?;
        let header = header.strip_prefix('#').ok_or_else(|| Error::Parse {
            file: source.into(),
            line: 1,
            msg: "missing `#` header line".into(),
        })?;
        let mut group_id = None;
        let mut views = None;
        let mut frames = None;
        let mut fingerprint = None;
        for tok in header.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                match k {
                    "group" => group_id = Some(v.to_string()),
                    "views" => views = v.parse::<usize>().ok(),
                    "frames" => frames = v.parse::<usize>().ok(),
                    "fingerprint" => fingerprint = Some(v.to_string()),
                    _ => {}
                }
            }
        }
        let (group_id, views, frames, fingerprint) = match (group_id, views, frames, fingerprint) {
            (Some(g), Some(v), Some(n), Some(f)) if v > 0 => (g, v, n, f),
            _ => {
                return Err(Error::Parse {
                    file: source.into(),
                    line: 1,
                    msg: "header must carry group=, views=, frames=, fingerprint=".into(),
                })
            }
        };

        let mut per_view = vec![Vec::with_capacity(frames); views];
        let mut selected = Vec::with_capacity(frames);
        let mut expected = (0..frames).flat_map(|f| (0..views).map(move |v| (f, v)));
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 8 {
                return Err(Error::Parse {
                    file: source.into(),
                    line: lineno + 1,
                    msg: format!("expected 8 fields, got {}", parts.len()),
                });
            }
            let parse_f = |i: usize| -> Result<f64> {
                parts[i].trim().parse().map_err(|_| Error::Parse {
                    file: source.into(),
                    line: lineno + 1,
                    msg: format!("field {} `{}` is not a number", i + 1, parts[i]),
                })
            };
            let parse_u = |i: usize| -> Result<usize> {
                parts[i].trim().parse().map_err(|_| Error::Parse {
                    file: source.into(),
                    line: lineno + 1,
                    msg: format!("field {} `{}` is not an index", i + 1, parts[i]),
                })
            };
            let (frame, view) = (parse_u(0)?, parse_u(1)?);
            match expected.next() {
                Some((ef, ev)) if ef == frame && ev == view => {}
                _ => {
                    return Err(Error::Parse {
                        file: source.into(),
                        line: lineno + 1,
                        msg: format!("unexpected row order at frame {frame}, view {view}"),
                    })
                }
            }
            let bbox = BoundingBox {
                x: parse_f(2)?,
                y: parse_f(3)?,
                w: parse_f(4)?,
                h: parse_f(5)?,
            };
            let score = parse_f(6)?;
            let sel = parse_u(7)?;
            if sel >= views {
                return Err(Error::Parse {
                    file: source.into(),
                    line: lineno + 1,
                    msg: format!("selected view {sel} out of range for {views} views"),
                });
            }
            if view == 0 {
                selected.push(sel);
            } else if selected[frame] != sel {
                return Err(Error::Parse {
                    file: source.into(),
                    line: lineno + 1,
                    msg: format!(
                        "selected view {sel} disagrees with {} for frame {frame}",
                        selected[frame]
                    ),
                });
            }
            per_view[view].push(ResultEntry { bbox, score });
        }
        if expected.next().is_some() {
            return Err(Error::Parse {
                file: source.into(),
                line: 0,
                msg: format!("row count does not match views={views} frames={frames}"),
            });
        }
        Ok(Self {
            group_id,
            fingerprint,
            per_view,
            selected,
        })
    }
}

/// Save per-view trajectories for one group.
pub fn save_results(
    trajectories: &[Trajectory],
    group_id: &str,
    fingerprint: &str,
    path: &Path,
) -> Result<ResultsFile> {
    let rf = ResultsFile::from_trajectories(group_id, fingerprint, trajectories)?;
    rf.save(path)?;
    Ok(rf)
}
