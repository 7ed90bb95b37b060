//! Tracker configuration: typed defaults, a dotted key-value file format,
//! and a stable fingerprint recorded into results files.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// Re-detection parameters (score-statistics loss test + search expansion).
#[derive(Debug, Clone, PartialEq)]
pub struct RedetectConfig {
    pub enabled: bool,
    /// Multiplier on the score standard deviation in the loss threshold
    /// ω = μ − λ·σ.
    pub lambda: f64,
    /// Absolute score floor, expressed as a fraction of the running maximum
    /// score seen so far.
    pub t_score: f64,
    /// Number of past peak scores kept for the threshold statistics.
    pub q: usize,
    /// Per-step multiplier on the search pad factor during expansion.
    pub expand_factor: f64,
    /// Expansion steps tried before falling back to a full-frame search.
    pub max_expansions: usize,
    /// A recovery must additionally score at least this fraction of the
    /// running maximum; keeps a lenient post-loss ω from re-locking onto
    /// background.
    pub recovery_frac: f64,
}

impl Default for RedetectConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda: 2.0,
            t_score: 0.05,
            q: 5,
            expand_factor: 1.5,
            max_expansions: 3,
            recovery_frac: 0.5,
        }
    }
}

impl RedetectConfig {
    /// Recommended λ by view count: 2.0 for one or two views, 1.25 for
    /// three or more.
    pub fn recommended_lambda(view_count: usize) -> f64 {
        if view_count >= 3 {
            1.25
        } else {
            2.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::Config(format!(
                "redetect.lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.expand_factor <= 1.0 {
            return Err(Error::Config(format!(
                "redetect.expand_factor must be > 1, got {}",
                self.expand_factor
            )));
        }
        if self.q == 0 {
            return Err(Error::Config("redetect.q must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.t_score) {
            return Err(Error::Config(format!(
                "redetect.t_score must be in [0, 1], got {}",
                self.t_score
            )));
        }
        if !(0.0..=1.0).contains(&self.recovery_frac) {
            return Err(Error::Config(format!(
                "redetect.recovery_frac must be in [0, 1], got {}",
                self.recovery_frac
            )));
        }
        Ok(())
    }
}

/// Full tracker configuration shared by all views of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Template patch side in pixels, pre-embedding.
    pub template_size: usize,
    /// Search region side as a multiple of the target box side.
    pub pad_factor: f64,
    /// Spatial downsampling factor of the feature embedding.
    pub cell_size: usize,
    /// Regularization of the appearance-variation solve.
    pub lambda_m: f64,
    /// Regularization of the background-suppression solve.
    pub lambda_w: f64,
    /// Regularization of the fusion-weight regression.
    pub lambda_u: f64,
    /// Candidate scale multipliers tried each frame.
    pub scale_steps: Vec<f64>,
    /// Penalty multiplied onto peak scores of non-unity scales.
    pub scale_penalty: f64,
    /// Cross-view template sharing (no effect with a single view).
    pub sharing: bool,
    /// Per-frame selection of the best view by fused peak score.
    pub view_fusion: bool,
    /// Normalize cross-view response maps by template energy before fusing.
    pub normalize_templates: bool,
    pub redetect: RedetectConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            template_size: 64,
            pad_factor: 2.0,
            cell_size: 2,
            lambda_m: 0.1,
            lambda_w: 0.1,
            lambda_u: 0.01,
            scale_steps: vec![0.975, 1.0, 1.025],
            scale_penalty: 0.97,
            sharing: true,
            view_fusion: true,
            normalize_templates: false,
            redetect: RedetectConfig::default(),
        }
    }
}

impl TrackerConfig {
    /// Search region side in pixels: template_size·pad_factor, rounded up
    /// to a multiple of the cell size.
    pub fn search_size(&self) -> usize {
        let raw = (self.template_size as f64 * self.pad_factor).round() as usize;
        raw.div_ceil(self.cell_size) * self.cell_size
    }

    /// Sigma (in pixels at search-patch resolution) of the Gaussian used to
    /// weight the background-suppression region. Half the nominal target
    /// extent within the search patch.
    pub fn gaussian_sigma_px(&self) -> f64 {
        self.search_size() as f64 / (2.0 * self.pad_factor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.template_size == 0 || !self.template_size.is_multiple_of(self.cell_size) {
            return Err(Error::Config(format!(
                "template_size {} must be positive and divisible by cell_size {}",
                self.template_size, self.cell_size
            )));
        }
        if self.cell_size == 0 {
            return Err(Error::Config("cell_size must be >= 1".into()));
        }
        if self.pad_factor < 1.0 {
            return Err(Error::Config(format!(
                "pad_factor must be >= 1, got {}",
                self.pad_factor
            )));
        }
        for l in [self.lambda_m, self.lambda_w, self.lambda_u] {
            if l < 0.0 {
                return Err(Error::Config(format!(
                    "regularization must be >= 0, got {l}"
                )));
            }
        }
        if self.scale_steps.is_empty() || self.scale_steps.iter().any(|s| *s <= 0.0) {
            return Err(Error::Config(
                "scale_steps must be non-empty and positive".into(),
            ));
        }
        if !(0.0 < self.scale_penalty && self.scale_penalty <= 1.0) {
            return Err(Error::Config(format!(
                "scale_penalty must be in (0, 1], got {}",
                self.scale_penalty
            )));
        }
        self.redetect.validate()
    }

    /// The eight ablation combinations of {re-detection, template sharing,
    /// view-aware fusion}, by preset name.
    pub fn ablation_preset(name: &str) -> Option<TrackerConfig> {
        let (rd, ts, vf) = match name {
            "baseline" => (false, false, false),
            "redetect" => (true, false, false),
            "sharing" => (false, true, false),
            "redetect+sharing" => (true, true, false),
            "view-fusion" => (false, false, true),
            "sharing+view-fusion" => (false, true, true),
            "redetect+view-fusion" => (true, false, true),
            "full" => (true, true, true),
            _ => return None,
        };
        let mut cfg = TrackerConfig::default();
        cfg.redetect.enabled = rd;
        cfg.sharing = ts;
        cfg.view_fusion = vf;
        Some(cfg)
    }

    /// Parse a key-value config file. Lines are `key = value`; `#` starts a
    /// comment; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<TrackerConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_text(&text, &path.display().to_string())
    }

    pub fn from_kv_text(text: &str, source: &str) -> Result<TrackerConfig> {
        let mut cfg = TrackerConfig::default();
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
            let key = key.trim();
            let value = value.trim();
            cfg.apply_kv(key, value).map_err(|e| Error::Parse {
                file: source.into(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "template_size" => self.template_size = parse_num(key, value)?,
            "pad_factor" => self.pad_factor = parse_num(key, value)?,
            "cell_size" => self.cell_size = parse_num(key, value)?,
            "lambda_m" => self.lambda_m = parse_num(key, value)?,
            "lambda_w" => self.lambda_w = parse_num(key, value)?,
            "lambda_u" => self.lambda_u = parse_num(key, value)?,
            "scale_penalty" => self.scale_penalty = parse_num(key, value)?,
            "scale_steps" => {
                self.scale_steps = value
                    .split(',')
                    .map(|s| parse_num("scale_steps", s.trim()))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "sharing.enabled" => self.sharing = parse_bool(key, value)?,
            "view_fusion.enabled" => self.view_fusion = parse_bool(key, value)?,
            "fusion.normalize" => self.normalize_templates = parse_bool(key, value)?,
            "redetect.enabled" => self.redetect.enabled = parse_bool(key, value)?,
            "redetect.lambda" => self.redetect.lambda = parse_num(key, value)?,
            "redetect.t_score" => self.redetect.t_score = parse_num(key, value)?,
            "redetect.q" => self.redetect.q = parse_num(key, value)?,
            "redetect.expand_factor" => self.redetect.expand_factor = parse_num(key, value)?,
            "redetect.max_expansions" => self.redetect.max_expansions = parse_num(key, value)?,
            "redetect.recovery_frac" => self.redetect.recovery_frac = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical key-value rendering; `from_kv_text` of the output
    /// reproduces the config exactly.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let steps = self
            .scale_steps
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(s, "template_size = {}", self.template_size);
        let _ = writeln!(s, "pad_factor = {}", self.pad_factor);
        let _ = writeln!(s, "cell_size = {}", self.cell_size);
        let _ = writeln!(s, "lambda_m = {}", self.lambda_m);
        let _ = writeln!(s, "lambda_w = {}", self.lambda_w);
        let _ = writeln!(s, "lambda_u = {}", self.lambda_u);
        let _ = writeln!(s, "scale_steps = {steps}");
        let _ = writeln!(s, "scale_penalty = {}", self.scale_penalty);
        let _ = writeln!(s, "sharing.enabled = {}", self.sharing);
        let _ = writeln!(s, "view_fusion.enabled = {}", self.view_fusion);
        let _ = writeln!(s, "fusion.normalize = {}", self.normalize_templates);
        let _ = writeln!(s, "redetect.enabled = {}", self.redetect.enabled);
        let _ = writeln!(s, "redetect.lambda = {}", self.redetect.lambda);
        let _ = writeln!(s, "redetect.t_score = {}", self.redetect.t_score);
        let _ = writeln!(s, "redetect.q = {}", self.redetect.q);
        let _ = writeln!(
            s,
            "redetect.expand_factor = {}",
            self.redetect.expand_factor
        );
        let _ = writeln!(
            s,
            "redetect.max_expansions = {}",
            self.redetect.max_expansions
        );
        let _ = writeln!(
            s,
            "redetect.recovery_frac = {}",
            self.redetect.recovery_frac
        );
        s
    }

    /// Short stable hash of the canonical rendering.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_kv_text().as_bytes());
        let mut out = String::with_capacity(16);
        for b in digest.iter().take(8) {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean `{value}` for `{key}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrackerConfig::default().validate().unwrap();
        assert_eq!(TrackerConfig::default().search_size(), 128);
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = TrackerConfig::default();
        cfg.lambda_m = 0.25;
        cfg.scale_steps = vec![0.95, 1.0, 1.05];
        cfg.redetect.q = 8;
        let text = cfg.to_kv_text();
        let back = TrackerConfig::from_kv_text(&text, "mem").unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.fingerprint(), back.fingerprint());
    }

    #[test]
    fn unknown_key_is_an_error_with_location() {
        let err = TrackerConfig::from_kv_text("bogus_key = 3\n", "test.cfg").unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert_eq!(file, "test.cfg");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = TrackerConfig::from_kv_text("# comment\n\nlambda_m = 0.5  # trailing\n", "mem")
            .unwrap();
        assert_eq!(cfg.lambda_m, 0.5);
    }

    #[test]
    fn ablation_presets_cover_all_switch_combinations() {
        let mut seen = std::collections::HashSet::new();
        for name in [
            "baseline",
            "redetect",
            "sharing",
            "redetect+sharing",
            "view-fusion",
            "sharing+view-fusion",
            "redetect+view-fusion",
            "full",
        ] {
            let cfg = TrackerConfig::ablation_preset(name).unwrap();
            seen.insert((cfg.redetect.enabled, cfg.sharing, cfg.view_fusion));
        }
        assert_eq!(seen.len(), 8);
        assert!(TrackerConfig::ablation_preset("nope").is_none());
    }

    #[test]
    fn recommended_lambda_by_view_count() {
        assert_eq!(RedetectConfig::recommended_lambda(2), 2.0);
        assert_eq!(RedetectConfig::recommended_lambda(3), 1.25);
    }

    #[test]
    fn fingerprint_changes_with_config() {
        let a = TrackerConfig::default();
        let mut b = TrackerConfig::default();
        b.lambda_u = 0.02;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
