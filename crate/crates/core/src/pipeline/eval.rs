//! Held-out evaluation: deterministic generations scored per category.

use crate::domain::{Category, PromptSpec, Scene};
use crate::error::{Error, Result};
use crate::models::encode_prompt;
use crate::pipeline::config::{Mode, RunConfig};
use crate::pipeline::state::PolicyModel;
use crate::world::{
    alignment_score, decompose_questions, ground_truth_score, DecoderSpec, TokenGrammar,
    WorldVocab,
};
use serde::{Deserialize, Serialize};

/// Mean scores over one prompt category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryEval {
    pub category: Category,
    pub prompt_count: usize,
    pub mean_ground_truth: f64,
    pub mean_alignment: f64,
}

/// Scores over a full held-out set, grouped by category plus
/// prompt-weighted overall means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category: Vec<CategoryEval>,
    pub overall_ground_truth: f64,
    pub overall_alignment: f64,
    pub prompt_count: usize,
}

/// Produce the policy's deterministic scene for one prompt: the mean forward
/// for the feature policy, the greedy rollout for the token policy.
pub(crate) fn deterministic_scene(
    policy: &PolicyModel,
    cfg: &RunConfig,
    grammar: &TokenGrammar,
    decoder: &DecoderSpec,
    prompt: &PromptSpec,
) -> Result<Scene> {
    match policy {
        PolicyModel::Continuous(net) => {
            let enc = encode_prompt(prompt, net.input_dim(), cfg.seeds.embedding);
            decoder.decode_continuous(&net.forward(&enc))
        }
        PolicyModel::Discrete(ar) => {
            let enc = encode_prompt(prompt, ar.encoding_dim(), cfg.seeds.embedding);
            Ok(grammar.decode(&ar.greedy(&enc)))
        }
    }
}

fn policy_matches_mode(policy: &PolicyModel, mode: Mode) -> Result<()> {
    let ok = matches!(
        (policy, mode),
        (PolicyModel::Continuous(_), Mode::Continuous) | (PolicyModel::Discrete(_), Mode::Discrete)
    );
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(
            "policy flavor does not match configured mode".into(),
        ))
    }
}

/// The scene decoder a run uses, derived from the config's decoder settings
/// and the feature policy's output shape.
pub fn build_decoder(cfg: &RunConfig, vocab: &WorldVocab) -> Result<DecoderSpec> {
    let (rows, cols) = (cfg.model.mlp.out_rows, cfg.model.mlp.out_cols);
    DecoderSpec::new(vocab, &cfg.decoder, rows, cols, cfg.seeds.decoder)
}

/// Evaluate a policy on held-out prompts with a caller-supplied quality
/// scorer. The scorer sees only the prompt and the decoded scene.
pub fn evaluate_policy(
    policy: &PolicyModel,
    cfg: &RunConfig,
    prompts: &[PromptSpec],
    scorer: &dyn Fn(&PromptSpec, &Scene) -> f64,
) -> Result<EvalReport> {
    if prompts.is_empty() {
        return Err(Error::EmptyInput("held-out prompt set"));
    }
    policy_matches_mode(policy, cfg.mode)?;
    let vocab = WorldVocab::standard();
    let grammar = TokenGrammar::standard(&vocab);
    let decoder = build_decoder(cfg, &vocab)?;

    let mut per_category = Vec::new();
    let mut total_gt = 0.0;
    let mut total_align = 0.0;
    for category in Category::ALL {
        let mut count = 0usize;
        let mut gt_sum = 0.0;
        let mut align_sum = 0.0;
        for prompt in prompts.iter().filter(|p| p.category == category) {
            let scene = deterministic_scene(policy, cfg, &grammar, &decoder, prompt)?;
            let questions = decompose_questions(&vocab, prompt);
            gt_sum += scorer(prompt, &scene);
            align_sum += alignment_score(&cfg.judge, &scene, &questions)?;
            count += 1;
        }
        if count == 0 {
            continue;
        }
        total_gt += gt_sum;
        total_align += align_sum;
        per_category.push(CategoryEval {
            category,
            prompt_count: count,
            mean_ground_truth: gt_sum / count as f64,
            mean_alignment: align_sum / count as f64,
        });
    }
    let n = prompts.len() as f64;
    Ok(EvalReport {
        per_category,
        overall_ground_truth: total_gt / n,
        overall_alignment: total_align / n,
        prompt_count: prompts.len(),
    })
}

/// Evaluate against the true satisfied-fact fraction.
pub fn evaluate(policy: &PolicyModel, cfg: &RunConfig, prompts: &[PromptSpec]) -> Result<EvalReport> {
    evaluate_policy(policy, cfg, prompts, &|prompt, scene| {
        ground_truth_score(prompt, scene)
    })
}
