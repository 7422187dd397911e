//! Whole-run commands: the full loop, held-out evaluation, and grid sweeps.

use std::path::Path;

use alignlab_core::pipeline::{
    evaluate, feedback_grid, heldout_prompts, kernel_grid, negative_range_grid, run_full,
    run_sweep, EvalReport, MetricsLog, RunConfig,
};
use anyhow::{bail, Result};

use crate::store::{self, CHECKPOINT_FILE, EVAL_FILE, METRICS_FILE, SWEEP_FILE};
use crate::GridKind;

pub fn iterate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let run = run_full(cfg)?;
    store::save_checkpoint(out, cfg, &run.state)?;
    store::save_metrics(out, &run.metrics)?;
    store::write_json(out, EVAL_FILE, &run.evals)?;
    store::write_manifest(
        out,
        "iterate",
        cfg,
        &[CHECKPOINT_FILE, METRICS_FILE, EVAL_FILE],
    )?;
    for (round, report) in run.evals.iter().enumerate() {
        let label = if round == 0 {
            "before training".to_string()
        } else {
            format!("after round {round}")
        };
        println!(
            "{label}: held-out ground truth {:.4}, alignment {:.4}",
            report.overall_ground_truth, report.overall_alignment
        );
    }
    println!("run complete; outputs in {}", out.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, out: &Path) -> Result<()> {
    let state = store::load_state(out, cfg)?;
    let heldout = heldout_prompts(cfg)?;
    let report = evaluate(&state.policy, cfg, &heldout)?;
    store::write_json(out, EVAL_FILE, &report)?;

    // Fold the snapshot into the metrics log so `report` can chart it.
    // Re-running eval at the same iteration replaces that iteration's rows
    // instead of stacking duplicates.
    let previous = store::load_metrics(out)?;
    let mut metrics = MetricsLog::new();
    for row in previous.rows() {
        if row.metric.is_some() && row.iteration == state.iteration {
            continue;
        }
        match (row.step, row.loss, &row.category, &row.metric, row.value) {
            (Some(step), Some(loss), ..) => metrics.push_train(row.iteration, step, loss),
            (_, _, Some(category), Some(metric), Some(value)) => {
                metrics.push_eval(row.iteration, category, metric, value)
            }
            _ => {}
        }
    }
    for row in &report.per_category {
        let name = row.category.name();
        metrics.push_eval(state.iteration, name, "ground_truth", row.mean_ground_truth);
        metrics.push_eval(state.iteration, name, "alignment", row.mean_alignment);
    }
    metrics.push_eval(
        state.iteration,
        "overall",
        "ground_truth",
        report.overall_ground_truth,
    );
    metrics.push_eval(
        state.iteration,
        "overall",
        "alignment",
        report.overall_alignment,
    );
    store::save_metrics(out, &metrics)?;

    store::write_manifest(out, "eval", cfg, &[EVAL_FILE, METRICS_FILE])?;
    println!(
        "held-out evaluation after {} completed rounds:",
        state.iteration
    );
    print_eval_table(&report);
    Ok(())
}

fn print_eval_table(report: &EvalReport) {
    println!(
        "{:<16} {:>8} {:>14} {:>12}",
        "category", "prompts", "ground-truth", "alignment"
    );
    for row in &report.per_category {
        println!(
            "{:<16} {:>8} {:>14.4} {:>12.4}",
            row.category.name(),
            row.prompt_count,
            row.mean_ground_truth,
            row.mean_alignment
        );
    }
    println!(
        "{:<16} {:>8} {:>14.4} {:>12.4}",
        "overall", report.prompt_count, report.overall_ground_truth, report.overall_alignment
    );
}

pub fn sweep(cfg: &RunConfig, out: &Path, grid: GridKind, windows: &[(usize, usize)]) -> Result<()> {
    let points = match grid {
        GridKind::Kernel => kernel_grid(cfg)?,
        GridKind::Feedback => feedback_grid(cfg),
        GridKind::NegativeRange => {
            if windows.is_empty() {
                bail!("the negative-range grid needs at least one --window LO..HI");
            }
            negative_range_grid(cfg, windows)
        }
    };
    println!("sweeping {} variants, this runs a full loop for each", points.len());
    let rows = run_sweep(&points)?;
    store::write_json(out, SWEEP_FILE, &rows)?;
    store::write_manifest(out, "sweep", cfg, &[SWEEP_FILE])?;
    println!(
        "{:<28} {:>10} {:>10} {:>9}",
        "variant", "first", "last", "delta"
    );
    for row in &rows {
        let first = row.first.overall_ground_truth;
        let last = row.last.overall_ground_truth;
        println!(
            "{:<28} {:>10.4} {:>10.4} {:>+9.4}",
            row.label,
            first,
            last,
            last - first
        );
    }
    Ok(())
}
