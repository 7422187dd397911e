//! Run configuration: one JSON document drives the whole pipeline.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::DpoConfig;
use crate::models::{ArConfig, MlpConfig};
use crate::pipeline::pairs::PairPolicy;
use crate::world::{DecoderConfig, FeedbackMode, JudgeSpec, QuestionMode, TokenGrammar, WorldVocab};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn config_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

/// Whether the policy emits continuous feature matrices or discrete token
/// sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Discrete,
    Continuous,
}

/// Per-component seeds so each randomness consumer draws from its own
/// stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub world: u64,
    pub judge: u64,
    pub model: u64,
    pub decoder: u64,
    pub embedding: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::from_master(17)
    }
}

impl Seeds {
    /// Derive the five component seeds from one master seed.
    pub fn from_master(master: u64) -> Self {
        let root = Rng::new(master);
        let draw = |label: &str| root.split(label).next_u64();
        Seeds {
            world: draw("world"),
            judge: draw("judge"),
            model: draw("model"),
            decoder: draw("decoder"),
            embedding: draw("embedding"),
        }
    }
}

/// Optimizer schedule and batching.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub warmup_steps: usize,
    pub base_lr: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 400,
            warmup_steps: 40,
            base_lr: 1e-3,
            batch_size: 64,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "base_lr must be positive and finite, got {}",
                self.base_lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Backbone settings for both policy flavors; only the active mode's half is
/// used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub mlp: MlpConfig,
    pub ar: ArConfig,
}

/// Everything a full run needs, serialized as one schema-versioned JSON
/// document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(rename = "schema_version", default = "config_schema_version")]
    pub schema_version: u32,
    pub mode: Mode,
    pub dpo: DpoConfig,
    /// Required in continuous mode, forbidden in discrete mode.
    pub kernel: Option<KernelSpec>,
    pub pair_policy: PairPolicy,
    pub feedback: FeedbackMode,
    pub question_mode: QuestionMode,
    pub seeds: Seeds,
    pub prompts_per_category: usize,
    pub heldout_per_category: usize,
    pub iterations: usize,
    pub optimizer: OptimizerConfig,
    pub model: ModelConfig,
    pub judge: JudgeSpec,
    pub decoder: DecoderConfig,
    /// Optional early stop: halt when the overall held-out score moves less
    /// than this between consecutive iterations.
    pub plateau_delta: Option<f64>,
    /// Keep dropout active during training forwards instead of the default
    /// deterministic mean forward.
    pub train_forward_stochastic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            mode: Mode::Continuous,
            dpo: DpoConfig::default(),
            kernel: Some(KernelSpec {
                aggregation: crate::kernels::Aggregation::AvgPool,
                distance: crate::kernels::DistanceFn::Cosine,
                gamma: 3.0,
            }),
            pair_policy: PairPolicy::default(),
            feedback: FeedbackMode::default(),
            question_mode: QuestionMode::default(),
            seeds: Seeds::default(),
            prompts_per_category: 128,
            heldout_per_category: 32,
            iterations: 3,
            optimizer: OptimizerConfig::default(),
            model: ModelConfig::default(),
            judge: JudgeSpec::noiseless(),
            decoder: DecoderConfig::default(),
            plateau_delta: None,
            train_forward_stochastic: false,
        }
    }
}

impl RunConfig {
    /// Defaults for the discrete token policy: 10 samples per prompt with
    /// top-1/last-1 pairing.
    pub fn discrete_default() -> Self {
        RunConfig {
            mode: Mode::Discrete,
            kernel: None,
            pair_policy: PairPolicy {
                samples_per_prompt: 10,
                top_n: 1,
                last_n: 1,
                negative_range: None,
            },
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported config schema version {}, expected {CONFIG_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.dpo.validate()?;
        self.pair_policy.validate()?;
        self.optimizer.validate()?;
        self.judge.validate()?;
        self.question_mode.ensure_supported()?;
        match self.mode {
            Mode::Continuous => match &self.kernel {
                Some(kernel) => kernel.validate()?,
                None => {
                    return Err(Error::InvalidConfig(
                        "continuous mode requires a kernel spec".into(),
                    ))
                }
            },
            Mode::Discrete => {
                if self.kernel.is_some() {
                    return Err(Error::InvalidConfig(
                        "discrete mode does not take a kernel spec".into(),
                    ));
                }
                let min_vocab = TokenGrammar::standard(&WorldVocab::standard()).min_vocab();
                if self.model.ar.vocab_size < min_vocab {
                    return Err(Error::InvalidConfig(format!(
                        "vocab_size {} cannot express the token grammar (needs {min_vocab})",
                        self.model.ar.vocab_size
                    )));
                }
            }
        }
        if self.prompts_per_category == 0 || self.heldout_per_category == 0 {
            return Err(Error::InvalidConfig(
                "prompt counts per category must be positive".into(),
            ));
        }
        if let Some(delta) = self.plateau_delta {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "plateau_delta must be positive and finite, got {delta}"
                )));
            }
        }
        Ok(())
    }
}
