//! Iteration state and checkpointing.

use crate::models::{ArPolicy, DropoutNet};
use crate::pipeline::config::RunConfig;
use serde::{Deserialize, Serialize};

/// Either policy flavor, so iteration state can carry both modes through one
/// type.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PolicyModel {
    Continuous(DropoutNet),
    Discrete(ArPolicy),
}

impl PolicyModel {
    pub fn param_count(&self) -> usize {
        match self {
            PolicyModel::Continuous(net) => net.param_count(),
            PolicyModel::Discrete(policy) => policy.param_count(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            PolicyModel::Continuous(net) => net.params(),
            PolicyModel::Discrete(policy) => policy.params(),
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> crate::Result<()> {
        match self {
            PolicyModel::Continuous(net) => net.set_params(params),
            PolicyModel::Discrete(policy) => policy.set_params(params),
        }
    }
}

/// Held-out summary captured after an iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_ground_truth: f64,
    pub mean_alignment: f64,
}

/// What one improvement iteration did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss_start: f64,
    pub loss_end: f64,
    pub pair_count: usize,
    pub train_losses: Vec<f64>,
    pub eval: Option<EvalSummary>,
}

/// Policy, frozen reference, and history; the unit the pipeline advances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationState {
    pub iteration: usize,
    pub policy: PolicyModel,
    pub reference: PolicyModel,
    pub history: Vec<IterationRecord>,
}

/// Serializable snapshot of a run: config plus state, schema-versioned.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: RunConfig,
    pub state: IterationState,
}

impl Checkpoint {
    pub fn new(config: RunConfig, state: IterationState) -> Self {
        Checkpoint {
            schema_version: crate::pipeline::config::CONFIG_SCHEMA_VERSION,
            config,
            state,
        }
    }
}
