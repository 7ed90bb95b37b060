//! `mvtrack eval`: score results files against dataset ground truth.
//!
//! Emits per-view OPE curves, selected-view and per-frame-max fusion
//! curves as CSV, prints a per-group summary table, and writes
//! `summary.json` with the aggregate and per-attribute numbers.

use crate::EvalArgs;
use anyhow::{Context, Result};
use mvtrack_core::dataio::{load_group, GroupSequence, ResultsFile, ATTRIBUTE_NAMES};
use mvtrack_core::eval::{
    afs, attribute_breakdown, center_errors, curve_from_center_errors, curve_from_ious, ifs,
    one_hot_weights, success_scores, EvalCurve, FrameScore, GroupMetrics, SummaryReport, ViewOpe,
};
use mvtrack_core::imaging::BoundingBox;
use std::collections::BTreeMap;
use std::path::Path;

pub fn run(args: &EvalArgs) -> Result<bool> {
    let filter = crate::parse_group_filter(&args.groups);
    let groups = crate::discover_groups(&args.dataset, &filter)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.results.clone());
    let curves_dir = out_dir.join("curves");
    std::fs::create_dir_all(&curves_dir)?;

    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for path in &groups {
        let seq = load_group(path).with_context(|| format!("loading {}", path.display()))?;
        let results_path = args.results.join(format!("{}.txt", seq.group_id));
        if !results_path.is_file() {
            skipped.push(seq.group_id.clone());
            continue;
        }
        let results = ResultsFile::load(&results_path)
            .with_context(|| format!("parsing {}", results_path.display()))?;
        let eval = evaluate_group(&seq, &results)
            .with_context(|| format!("evaluating {}", seq.group_id))?;
        write_group_curves(&curves_dir, &eval, &args.metric)?;
        evaluated.push((seq, eval));
    }

    if evaluated.is_empty() {
        anyhow::bail!("no groups with results found in {}", args.results.display());
    }

    print_table(&evaluated);

    let per_attribute = attribute_breakdown(
        &evaluated
            .iter()
            .map(|(seq, e)| (seq.attributes, e.metrics))
            .collect::<Vec<_>>(),
        &ATTRIBUTE_NAMES,
    )?;
    let n = evaluated.len() as f64;
    let mut per_view: BTreeMap<String, ViewOpe> = BTreeMap::new();
    for (_, e) in &evaluated {
        for (k, m) in e.per_view.iter().enumerate() {
            let entry = per_view.entry(format!("view{}", k + 1)).or_default();
            entry.success_auc += m.0 / n;
            entry.precision_20px += m.1 / n;
        }
    }
    let mean =
        |f: fn(&GroupMetrics) -> f64| evaluated.iter().map(|(_, e)| f(&e.metrics)).sum::<f64>() / n;
    let summary = SummaryReport {
        groups: evaluated.len(),
        success_auc: mean(|m| m.success_auc),
        precision_20px: mean(|m| m.precision_20px),
        afs_success: mean(|m| m.afs_success),
        afs_precision: mean(|m| m.afs_precision),
        ifs_success: mean(|m| m.ifs_success),
        ifs_precision: mean(|m| m.ifs_precision),
        per_view,
        per_attribute,
    };
    std::fs::write(out_dir.join("summary.json"), summary.to_json_pretty())?;
    println!(
        "summary written to {}",
        out_dir.join("summary.json").display()
    );

    if !skipped.is_empty() {
        eprintln!(
            "{} group(s) had no results and were skipped: {}",
            skipped.len(),
            skipped.join(", ")
        );
        return Ok(false);
    }
    Ok(true)
}

pub struct GroupEval {
    pub group_id: String,
    pub metrics: GroupMetrics,
    /// (success AUC, precision@20) per view.
    pub per_view: Vec<(f64, f64)>,
    pub view_success: Vec<EvalCurve>,
    pub view_precision: Vec<EvalCurve>,
    pub afs_success_curve: EvalCurve,
    pub afs_precision_curve: EvalCurve,
    pub ifs_success_curve: EvalCurve,
    pub ifs_precision_curve: EvalCurve,
}

/// Score one group's results. The group-level OPE pools frames of all
/// views together; the fusion metrics use the logged per-frame selection.
pub fn evaluate_group(seq: &GroupSequence, results: &ResultsFile) -> Result<GroupEval> {
    let v = seq.view_count();
    anyhow::ensure!(
        results.view_count() == v,
        "results carry {} views, dataset has {v}",
        results.view_count()
    );
    anyhow::ensure!(
        results.frame_count() == seq.frame_count(),
        "results carry {} frames, dataset has {}",
        results.frame_count(),
        seq.frame_count()
    );
    let trajs = results.trajectories();

    let mut view_ious: Vec<Vec<FrameScore>> = Vec::with_capacity(v);
    let mut view_ces: Vec<Vec<Option<f64>>> = Vec::with_capacity(v);
    for k in 0..v {
        let gt: &[Option<BoundingBox>] = &seq.views[k].ground_truth;
        view_ious.push(success_scores(&trajs[k], gt)?);
        view_ces.push(center_errors(&trajs[k], gt)?);
    }

    let view_success: Vec<EvalCurve> = view_ious.iter().map(|s| curve_from_ious(s)).collect();
    let view_precision: Vec<EvalCurve> = view_ces
        .iter()
        .map(|e| curve_from_center_errors(e))
        .collect();

    // "all views together": pooled frames
    let pooled_ious: Vec<FrameScore> = view_ious.iter().flatten().copied().collect();
    let pooled_ces: Vec<Option<f64>> = view_ces.iter().flatten().copied().collect();
    let pooled_success = curve_from_ious(&pooled_ious);
    let pooled_precision = curve_from_center_errors(&pooled_ces);

    // fusion metrics from the logged selection
    let weights = one_hot_weights(&results.selected, v);
    let prec_ind: Vec<Vec<FrameScore>> = view_ces
        .iter()
        .map(|errs| {
            errs.iter()
                .map(|e| e.map(|e| if e <= 20.0 { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let afs_success = afs(&view_ious, &weights)?;
    let afs_precision = afs(&prec_ind, &weights)?;
    let ifs_success = ifs(&view_ious)?;
    let ifs_precision = ifs(&prec_ind)?;

    // curves of the selected-view and per-frame-best scores
    let n = seq.frame_count();
    let selected_ious: Vec<FrameScore> =
        (0..n).map(|i| view_ious[results.selected[i]][i]).collect();
    let selected_ces: Vec<Option<f64>> = (0..n).map(|i| view_ces[results.selected[i]][i]).collect();
    let best_ious: Vec<FrameScore> = (0..n)
        .map(|i| {
            (0..v)
                .filter_map(|k| view_ious[k][i])
                .fold(None, |acc: Option<f64>, x| {
                    Some(acc.map_or(x, |a| a.max(x)))
                })
        })
        .collect();
    let best_ces: Vec<Option<f64>> = (0..n)
        .map(|i| {
            (0..v)
                .filter_map(|k| view_ces[k][i])
                .fold(None, |acc: Option<f64>, x| {
                    Some(acc.map_or(x, |a| a.min(x)))
                })
        })
        .collect();

    Ok(GroupEval {
        group_id: seq.group_id.clone(),
        metrics: GroupMetrics {
            success_auc: pooled_success.auc,
            precision_20px: pooled_precision.value_at(20.0).unwrap_or(0.0),
            afs_success,
            afs_precision,
            ifs_success,
            ifs_precision,
        },
        per_view: view_success
            .iter()
            .zip(&view_precision)
            .map(|(s, p)| (s.auc, p.value_at(20.0).unwrap_or(0.0)))
            .collect(),
        view_success,
        view_precision,
        afs_success_curve: curve_from_ious(&selected_ious),
        afs_precision_curve: curve_from_center_errors(&selected_ces),
        ifs_success_curve: curve_from_ious(&best_ious),
        ifs_precision_curve: curve_from_center_errors(&best_ces),
    })
}

fn write_group_curves(dir: &Path, eval: &GroupEval, metric: &str) -> Result<()> {
    let success = metric == "success" || metric == "both";
    let precision = metric == "precision" || metric == "both";
    if success {
        for (k, c) in eval.view_success.iter().enumerate() {
            c.write_csv(&dir.join(format!("{}.success.view{}.csv", eval.group_id, k + 1)))?;
        }
        eval.afs_success_curve
            .write_csv(&dir.join(format!("{}.success.afs.csv", eval.group_id)))?;
        eval.ifs_success_curve
            .write_csv(&dir.join(format!("{}.success.ifs.csv", eval.group_id)))?;
    }
    if precision {
        for (k, c) in eval.view_precision.iter().enumerate() {
            c.write_csv(&dir.join(format!("{}.precision.view{}.csv", eval.group_id, k + 1)))?;
        }
        eval.afs_precision_curve
            .write_csv(&dir.join(format!("{}.precision.afs.csv", eval.group_id)))?;
        eval.ifs_precision_curve
            .write_csv(&dir.join(format!("{}.precision.ifs.csv", eval.group_id)))?;
    }
    Ok(())
}

fn print_table(evaluated: &[(GroupSequence, GroupEval)]) {
    println!(
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "group", "succ", "prec@20", "afs_s", "ifs_s", "afs_p", "ifs_p"
    );
    for (_, e) in evaluated {
        let m = &e.metrics;
        println!(
            "{:<24} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            e.group_id,
            m.success_auc,
            m.precision_20px,
            m.afs_success,
            m.ifs_success,
            m.afs_precision,
            m.ifs_precision
        );
    }
}
