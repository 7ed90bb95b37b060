//! `mvtrack synth`: render synthetic groups to disk.

use crate::SynthArgs;
use anyhow::{Context, Result};
use mvtrack_core::dataio::{synth_group, SynthConfig};

pub fn run(args: &SynthArgs) -> Result<bool> {
    let configs: Vec<SynthConfig> = match (&args.config, &args.fixture) {
        (Some(path), None) => vec![SynthConfig::from_file(path).context("loading scene config")?],
        (None, Some(name)) if name == "all" => SynthConfig::fixture_names()
            .iter()
            .map(|n| SynthConfig::fixture(n, args.seed))
            .collect::<mvtrack_core::Result<_>>()?,
        (None, Some(name)) => vec![SynthConfig::fixture(name, args.seed)?],
        _ => anyhow::bail!("provide either --config <file> or --fixture <name|all>"),
    };

    std::fs::create_dir_all(&args.out)?;
    for cfg in &configs {
        let seq =
            synth_group(cfg, &args.out).with_context(|| format!("rendering {}", cfg.group_id))?;
        println!(
            "rendered {}: {} views x {} frames at {}x{} -> {}",
            seq.group_id,
            seq.view_count(),
            seq.frame_count(),
            cfg.width,
            cfg.height,
            args.out.join(&seq.group_id).display()
        );
    }
    Ok(true)
}
