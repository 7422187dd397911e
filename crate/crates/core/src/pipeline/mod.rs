//! The self-improvement loop: prompt generation, diverse sampling,
//! decompositional feedback, preference-pair construction, preference
//! optimization, and reference rollover, plus evaluation, metrics, and
//! ablation sweeps.

mod config;
mod eval;
mod iterate;
mod metrics;
mod pairs;
mod state;
mod sweep;

pub use config::{
    Mode, ModelConfig, OptimizerConfig, RunConfig, Seeds, CONFIG_SCHEMA_VERSION,
};
pub use eval::{build_decoder, evaluate, evaluate_policy, CategoryEval, EvalReport};
pub use iterate::{
    feedback_stream, heldout_prompts, init_state, iteration_prompts, iteration_stream, run_full,
    run_full_with_scorer, run_iteration, train_continuous, train_discrete, RunOutput, TrainReport,
};
pub use metrics::{MetricRow, MetricsLog, METRICS_HEADER};
pub use pairs::{build_pair_indices, build_pairs, PairPolicy, PreferencePair};
pub use state::{Checkpoint, EvalSummary, IterationRecord, IterationState, PolicyModel};
pub use sweep::{feedback_grid, kernel_grid, negative_range_grid, run_sweep, SweepPoint, SweepRow};
