//! The synthetic symbolic world: vocabulary, prompt templates, question
//! decomposition, scene decoders, the probabilistic yes/no judge, and the
//! held-out ground-truth scorer.

mod decoder;
mod grammar;
mod judge;
mod prompts;
mod questions;
mod score;
mod vocab;

pub use decoder::{DecoderConfig, DecoderSpec};
pub use grammar::TokenGrammar;
pub use judge::{
    alignment_from_probs, alignment_score, feedback_score, judge_answer, FeedbackMode, JudgeSpec,
    QuestionMode,
};
pub use prompts::{generate_prompts, render_prompt_text};
pub use questions::{decompose_questions, question_text};
pub use score::ground_truth_score;
pub use vocab::{AttributeGroup, WorldVocab};
