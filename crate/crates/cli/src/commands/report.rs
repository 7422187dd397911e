//! Read-only rendering of a run directory into charts and a text summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use alignlab_core::losses::{enumerate_dropout_moments, mc_dropout_estimate};
use alignlab_core::models::{encode_prompt, DropoutNet};
use alignlab_core::pipeline::{heldout_prompts, Checkpoint, PolicyModel};
use alignlab_core::rng::Rng;
use anyhow::{bail, Context, Result};

use crate::store;
use crate::svg::{line_chart, Series};

/// Dropout rates probed for the diversity summary.
const DIVERSITY_RATES: [f64; 4] = [0.0, 0.05, 0.15, 0.3];
/// Stochastic forwards per rate when the mask space is too large to
/// enumerate. The probe is diagnostic, so a fixed local seed is fine.
const DIVERSITY_SAMPLES: usize = 512;

pub fn report(out: &Path) -> Result<()> {
    let metrics = store::load_metrics(out)?;
    let checkpoint = store::read_checkpoint(out)?;
    if metrics.is_empty() && checkpoint.is_none() {
        bail!(
            "nothing to report in {}: no metrics or checkpoint found",
            out.display()
        );
    }
    let report_dir = out.join("report");
    fs::create_dir_all(&report_dir)
        .with_context(|| format!("creating {}", report_dir.display()))?;

    // Pivot the flat metrics log into chartable series.
    let mut ground: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut alignment: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut losses: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for row in metrics.rows() {
        if let (Some(step), Some(loss)) = (row.step, row.loss) {
            losses
                .entry(row.iteration)
                .or_default()
                .push((step as f64, loss));
        }
        if let (Some(category), Some(metric), Some(value)) =
            (&row.category, &row.metric, row.value)
        {
            let chart = match metric.as_str() {
                "ground_truth" => &mut ground,
                "alignment" => &mut alignment,
                _ => continue,
            };
            chart
                .entry(category.clone())
                .or_default()
                .push((row.iteration as f64, value));
        }
    }

    let eval_series = |chart: &BTreeMap<String, Vec<(f64, f64)>>| -> Vec<Series> {
        chart
            .iter()
            .map(|(category, points)| Series::new(category.clone(), points.clone()))
            .collect()
    };
    write_chart(
        &report_dir,
        "ground_truth.svg",
        &line_chart(
            "held-out ground truth by category",
            "iteration",
            "mean score",
            &eval_series(&ground),
        ),
    )?;
    write_chart(
        &report_dir,
        "alignment.svg",
        &line_chart(
            "held-out self-assessed alignment by category",
            "iteration",
            "mean score",
            &eval_series(&alignment),
        ),
    )?;
    let loss_series: Vec<Series> = losses
        .iter()
        .map(|(round, points)| Series::new(format!("round {round}"), points.clone()))
        .collect();
    write_chart(
        &report_dir,
        "loss.svg",
        &line_chart(
            "preference loss per optimization step",
            "step",
            "batch loss",
            &loss_series,
        ),
    )?;

    let diversity = match &checkpoint {
        Some(checkpoint) => diversity_probe(checkpoint)?,
        None => None,
    };
    let diversity_points: Vec<(f64, f64)> = diversity.clone().unwrap_or_default();
    write_chart(
        &report_dir,
        "diversity.svg",
        &line_chart(
            "predictive diversity of the final policy",
            "dropout rate",
            "pooled predictive variance",
            &[Series::new("pooled variance", diversity_points)],
        ),
    )?;

    let summary = render_summary(&ground, &alignment, &losses, diversity.as_deref());
    fs::write(report_dir.join("summary.txt"), &summary)
        .with_context(|| format!("writing {}", report_dir.join("summary.txt").display()))?;
    print!("{summary}");
    println!("report written to {}", report_dir.display());
    Ok(())
}

fn write_chart(report_dir: &Path, name: &str, svg: &str) -> Result<()> {
    let path = report_dir.join(name);
    fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Pooled predictive variance of the checkpoint's policy under a range of
/// dropout rates, on the first held-out prompt. Exact mask enumeration when
/// the unit count allows it, Monte Carlo otherwise. Discrete policies have
/// no dropout mechanism, so they report nothing.
fn diversity_probe(checkpoint: &Checkpoint) -> Result<Option<Vec<(f64, f64)>>> {
    let PolicyModel::Continuous(net) = &checkpoint.state.policy else {
        return Ok(None);
    };
    let cfg = &checkpoint.config;
    let prompts = heldout_prompts(cfg)?;
    let prompt = prompts.first().expect("held-out set is never empty");
    let params = net.params();

    let mut rows = Vec::with_capacity(DIVERSITY_RATES.len());
    for rate in DIVERSITY_RATES {
        let mut probe_cfg = cfg.model.mlp.clone();
        probe_cfg.dropout_rate = rate;
        let mut probe = DropoutNet::new(&probe_cfg, cfg.seeds.model)?;
        probe.set_params(&params)?;
        let enc = encode_prompt(prompt, probe.input_dim(), cfg.seeds.embedding);
        let pooled = if probe.dropout_unit_count() <= 20 {
            enumerate_dropout_moments(&probe, &enc)?.2
        } else {
            let mut rng = Rng::new(7);
            mc_dropout_estimate(&probe, &enc, DIVERSITY_SAMPLES, &mut rng)?.1
        };
        rows.push((rate, pooled));
    }
    Ok(Some(rows))
}

fn render_summary(
    ground: &BTreeMap<String, Vec<(f64, f64)>>,
    alignment: &BTreeMap<String, Vec<(f64, f64)>>,
    losses: &BTreeMap<usize, Vec<(f64, f64)>>,
    diversity: Option<&[(f64, f64)]>,
) -> String {
    let mut text = String::new();
    if ground.is_empty() {
        text.push_str(
            "no evaluation rows in the metrics log; run `iterate` or `eval` first\n",
        );
    } else {
        text.push_str("held-out scores by iteration\n");
        let iterations: Vec<f64> = ground
            .values()
            .next()
            .map(|points| points.iter().map(|p| p.0).collect())
            .unwrap_or_default();
        text.push_str(&format!("{:<16} {:>6}", "category", "metric"));
        for iteration in &iterations {
            text.push_str(&format!(" {:>9}", format!("iter {iteration}")));
        }
        text.push('\n');
        for (label, chart) in [("truth", ground), ("align", alignment)] {
            for (category, points) in chart {
                text.push_str(&format!("{category:<16} {label:>6}"));
                for (_, value) in points {
                    text.push_str(&format!(" {value:>9.4}"));
                }
                text.push('\n');
            }
        }
    }

    if !losses.is_empty() {
        text.push_str("\ntraining loss by round (first step -> last step)\n");
        for (round, points) in losses {
            let first = points.first().map(|p| p.1).unwrap_or(f64::NAN);
            let last = points.last().map(|p| p.1).unwrap_or(f64::NAN);
            text.push_str(&format!(
                "round {round}: {first:.6} -> {last:.6} over {} steps\n",
                points.len()
            ));
        }
    }

    match diversity {
        Some(rows) => {
            text.push_str("\npredictive diversity of the final policy\n");
            for (rate, pooled) in rows {
                text.push_str(&format!(
                    "dropout {rate:>5.2}: pooled predictive variance {pooled:.6}\n"
                ));
            }
        }
        None => {
            text.push_str(
                "\npredictive diversity: not applicable (no continuous checkpoint)\n",
            );
        }
    }
    text
}
