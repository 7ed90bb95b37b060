//! Benchmark harness: track dataset groups (single- or multi-view),
//! evaluate results against ground truth, and generate synthetic fixtures.
//!
//! Exit codes: 0 success, 1 partial failure (some groups failed or were
//! skipped), 2 usage or configuration error.

#![allow(clippy::needless_range_loop)]

mod evaluate;
mod synth;
mod track;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mvtrack",
    version,
    about = "Multi-view single-object tracking benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track every group under a dataset root and write one results file
    /// per group.
    Track(TrackArgs),
    /// Evaluate results files against dataset ground truth and emit
    /// curve CSVs plus a JSON summary.
    Eval(EvalArgs),
    /// Render a synthetic multi-view group from a scene config.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct TrackArgs {
    /// Dataset root: one subdirectory per group.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated group ids to run (default: all).
    #[arg(long)]
    pub groups: Option<String>,
    /// Tracker config file (key = value lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ablation preset name (baseline, redetect, sharing, redetect+sharing,
    /// view-fusion, sharing+view-fusion, redetect+view-fusion, full).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Output directory for results files.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads across groups (within a group, frames stay
    /// sequential).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Run seed, recorded in the config fingerprint. Tracking itself is
    /// deterministic; the seed only matters for synthetic generation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Disable the re-detection module.
    #[arg(long)]
    pub no_redetect: bool,
    /// Disable cross-view template sharing.
    #[arg(long)]
    pub no_sharing: bool,
    /// Disable view-aware fusion (per-frame best-view selection).
    #[arg(long)]
    pub no_view_fusion: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Directory holding <group>.txt results files.
    #[arg(long)]
    pub results: PathBuf,
    /// Dataset root with the ground truth.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated group ids to evaluate (default: all in the dataset).
    #[arg(long)]
    pub groups: Option<String>,
    /// Output directory for curve CSVs and summary.json (default: the
    /// results directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Which curve family to emit.
    #[arg(long, value_parser = ["success", "precision", "both"], default_value = "both")]
    pub metric: String,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scene config file (`fixture = <name>` plus optional overrides).
    #[arg(long, conflicts_with = "fixture")]
    pub config: Option<PathBuf>,
    /// Named fixture to render directly; `all` renders the whole suite.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Seed for the generator (with --fixture).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output dataset root.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Track(args) => track::run(&args),
        Command::Eval(args) => evaluate::run(&args),
        Command::Synth(args) => synth::run(&args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Split a `--groups a,b,c` filter.
pub(crate) fn parse_group_filter(filter: &Option<String>) -> Option<Vec<String>> {
    filter.as_ref().map(|f| {
        f.split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    })
}

/// Group directories under a dataset root (sorted by id).
pub(crate) fn discover_groups(
    root: &std::path::Path,
    filter: &Option<Vec<String>>,
) -> anyhow::Result<Vec<PathBuf>> {
    let mut groups: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| anyhow::anyhow!("cannot read dataset root {}: {e}", root.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join("drone1").is_dir())
        .collect();
    groups.sort();
    if let Some(wanted) = filter {
        let by_id: std::collections::BTreeMap<String, PathBuf> = groups
            .into_iter()
            .filter_map(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| (n.to_string(), p.clone()))
            })
            .collect();
        let mut selected = Vec::new();
        for id in wanted {
            let path = by_id.get(id).ok_or_else(|| {
                anyhow::anyhow!("group `{id}` not found under {}", root.display())
            })?;
            selected.push(path.clone());
        }
        return Ok(selected);
    }
    if groups.is_empty() {
        anyhow::bail!("no groups found under {}", root.display());
    }
    Ok(groups)
}
