//! Ablation sweeps: run grids of configurations and collect first/last
//! held-out reports for side-by-side comparison.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::pipeline::config::{Mode, RunConfig};
use crate::pipeline::eval::EvalReport;
use crate::pipeline::iterate::run_full;
use crate::world::FeedbackMode;
use serde::{Deserialize, Serialize};

/// One labeled configuration in a sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub config: RunConfig,
}

/// Before/after held-out reports for one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub first: EvalReport,
    pub last: EvalReport,
}

/// All six aggregation/distance kernels at the base config's strength.
pub fn kernel_grid(base: &RunConfig) -> Result<Vec<SweepPoint>> {
    if base.mode != Mode::Continuous {
        return Err(Error::InvalidConfig(
            "kernel sweeps need a continuous base config".into(),
        ));
    }
    let gamma = kernel_gamma(base)?;
    Ok(KernelSpec::all_combinations(gamma)
        .into_iter()
        .map(|kernel| {
            let mut config = base.clone();
            config.kernel = Some(kernel);
            SweepPoint {
                label: kernel.label(),
                config,
            }
        })
        .collect())
}

fn kernel_gamma(base: &RunConfig) -> Result<f64> {
    base.kernel
        .as_ref()
        .map(|k| k.gamma)
        .ok_or_else(|| Error::InvalidConfig("continuous base config is missing a kernel".into()))
}

fn feedback_label(mode: FeedbackMode) -> &'static str {
    match mode {
        FeedbackMode::DiffOfProb => "diff_of_prob",
        FeedbackMode::RatioOfYes => "ratio_of_yes",
        FeedbackMode::RandomScore => "random_score",
    }
}

/// The three feedback modes on an otherwise fixed config.
pub fn feedback_grid(base: &RunConfig) -> Vec<SweepPoint> {
    [
        FeedbackMode::DiffOfProb,
        FeedbackMode::RatioOfYes,
        FeedbackMode::RandomScore,
    ]
    .into_iter()
    .map(|mode| {
        let mut config = base.clone();
        config.feedback = mode;
        SweepPoint {
            label: feedback_label(mode).to_owned(),
            config,
        }
    })
    .collect()
}

/// One point per rejected-sample window, overriding the pair policy's
/// negative range.
pub fn negative_range_grid(base: &RunConfig, windows: &[(usize, usize)]) -> Vec<SweepPoint> {
    windows
        .iter()
        .map(|&(lo, hi)| {
            let mut config = base.clone();
            config.pair_policy.negative_range = Some((lo, hi));
            SweepPoint {
                label: format!("neg_{lo}_{hi}"),
                config,
            }
        })
        .collect()
}

/// Run every point to completion and keep the first and last held-out
/// reports.
pub fn run_sweep(points: &[SweepPoint]) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    points
        .iter()
        .map(|point| {
            let out = run_full(&point.config)?;
            let first = out
                .evals
                .first()
                .cloned()
                .expect("run_full always evaluates the initial policy");
            let last = out
                .evals
                .last()
                .cloned()
                .expect("run_full always evaluates the initial policy");
            Ok(SweepRow {
                label: point.label.clone(),
                first,
                last,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MlpConfig;
    use crate::pipeline::config::OptimizerConfig;
    use crate::pipeline::pairs::PairPolicy;

    fn tiny_base() -> RunConfig {
        let mut cfg = RunConfig {
            prompts_per_category: 3,
            heldout_per_category: 2,
            iterations: 1,
            pair_policy: PairPolicy {
                samples_per_prompt: 4,
                top_n: 1,
                last_n: 1,
                negative_range: None,
            },
            optimizer: OptimizerConfig {
                steps: 3,
                warmup_steps: 1,
                base_lr: 1e-3,
                batch_size: 8,
            },
            ..RunConfig::default()
        };
        cfg.model.mlp = MlpConfig {
            input_dim: 12,
            hidden_width: 16,
            hidden_layers: 2,
            dropout_rate: 0.3,
            dropout_last: 1,
            out_rows: 3,
            out_cols: 6,
        };
        cfg
    }

    #[test]
    fn kernel_grid_covers_all_six_combinations_with_distinct_labels() {
        let points = kernel_grid(&tiny_base()).unwrap();
        assert_eq!(points.len(), 6);
        let mut labels: Vec<&str> = points.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 6);
        for point in &points {
            point.config.validate().unwrap();
            assert_eq!(point.config.kernel.unwrap().gamma, 3.0);
        }
    }

    #[test]
    fn kernel_grid_rejects_a_discrete_base() {
        assert!(kernel_grid(&RunConfig::discrete_default()).is_err());
    }

    #[test]
    fn feedback_grid_has_one_point_per_mode() {
        let points = feedback_grid(&tiny_base());
        assert_eq!(points.len(), 3);
        assert_eq!(points[0].label, "diff_of_prob");
        assert_eq!(points[2].config.feedback, FeedbackMode::RandomScore);
    }

    #[test]
    fn negative_range_grid_sets_the_window() {
        let points = negative_range_grid(&tiny_base(), &[(2, 4), (0, 4)]);
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].label, "neg_2_4");
        assert_eq!(points[0].config.pair_policy.negative_range, Some((2, 4)));
        points[0].config.validate().unwrap();
    }

    #[test]
    fn run_sweep_returns_one_row_per_point() {
        let rows = run_sweep(&feedback_grid(&tiny_base())).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.first.prompt_count, 8);
            assert_eq!(row.last.prompt_count, 8);
        }
        assert!(run_sweep(&[]).is_err());
    }
}
