//! The probabilistic yes/no judge and the alignment-score feedback family.

use crate::domain::{Question, Scene};
use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Answer-probability model for yes/no probes.
///
/// `sharpness` controls how decisively the judge reads the scene,
/// `error_rate` leaks mass to the wrong answer, and `other_mass` reserves
/// probability for non-yes/no answers so that pYes + pNo < 1, mirroring raw
/// token-probability readouts. `renormalize` optionally rescales the pair to
/// sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeSpec {
    /// May be infinite (the noiseless judge), which JSON cannot carry as a
    /// number, so this field round-trips infinities as the string "inf".
    #[serde(with = "json_sharpness")]
    pub sharpness: f64,
    pub error_rate: f64,
    pub other_mass: f64,
    pub renormalize: bool,
}

mod json_sharpness {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumberOrName {
        Number(f64),
        Name(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match NumberOrName::deserialize(d)? {
            NumberOrName::Number(v) => Ok(v),
            NumberOrName::Name(name) => match name.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "sharpness must be a number, \"inf\", \"-inf\", or \"nan\", got {other:?}"
                ))),
            },
        }
    }
}

impl Default for JudgeSpec {
    fn default() -> Self {
        JudgeSpec {
            sharpness: 6.0,
            error_rate: 0.02,
            other_mass: 0.05,
            renormalize: false,
        }
    }
}

impl JudgeSpec {
    /// Oracle mode: infinitely sharp, error-free, all mass on yes/no.
    pub fn noiseless() -> Self {
        JudgeSpec {
            sharpness: f64::INFINITY,
            error_rate: 0.0,
            other_mass: 0.0,
            renormalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sharpness.is_nan() || self.sharpness <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "judge sharpness must be positive, got {}",
                self.sharpness
            )));
        }
        if !(0.0..0.5).contains(&self.error_rate) {
            return Err(Error::InvalidConfig(format!(
                "judge error_rate must lie in [0, 0.5), got {}",
                self.error_rate
            )));
        }
        if !(0.0..=0.2).contains(&self.other_mass) {
            return Err(Error::InvalidConfig(format!(
                "judge other_mass must lie in [0, 0.2], got {}",
                self.other_mass
            )));
        }
        Ok(())
    }
}

/// Probability the judge answers yes and no for one probe. The remaining
/// `other_mass` goes to non-yes/no answers, so the pair sums to
/// `1 - other_mass` (or exactly 1 with `renormalize`).
pub fn judge_answer(judge: &JudgeSpec, scene: &Scene, question: &Question) -> (f64, f64) {
    let pair_mass = 1.0 - judge.other_mass;
    let confident = (1.0 - judge.error_rate) * sigmoid(judge.sharpness);
    let holds = scene.contains(&question.fact);
    let (mut p_yes, mut p_no) = if holds {
        (pair_mass * confident, pair_mass * (1.0 - confident))
    } else {
        (pair_mass * (1.0 - confident), pair_mass * confident)
    };
    if judge.renormalize && pair_mass > 0.0 {
        p_yes /= pair_mass;
        p_no /= pair_mass;
    }
    (p_yes, p_no)
}

/// Mean yes/no probability gap over explicit probability pairs.
pub fn alignment_from_probs(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyQuestions);
    }
    let total: f64 = pairs.iter().map(|&(yes, no)| yes - no).sum();
    Ok(total / pairs.len() as f64)
}

/// Text-image alignment score: mean of pYes - pNo over the question set.
pub fn alignment_score(judge: &JudgeSpec, scene: &Scene, questions: &[Question]) -> Result<f64> {
    if questions.is_empty() {
        return Err(Error::EmptyQuestions);
    }
    let pairs: Vec<(f64, f64)> = questions
        .iter()
        .map(|q| judge_answer(judge, scene, q))
        .collect();
    alignment_from_probs(&pairs)
}

/// How candidate scenes are scored during self-feedback.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackMode {
    /// The alignment score: mean probability gap per question.
    #[default]
    DiffOfProb,
    /// Fraction of questions the judge leans yes on.
    RatioOfYes,
    /// Uniform noise, a no-signal control.
    RandomScore,
}

/// How questions are produced for self-feedback. Only decompositional
/// self-questioning is implemented; the other two strategies exist as
/// configuration points and report themselves as unsupported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionMode {
    /// Decompose the prompt into one probe per atomic fact.
    #[default]
    SelfQ,
    /// Ask a single probe about the whole prompt text.
    PromptQ,
    /// Probe each surface phrase without decomposition.
    PhraseQ,
}

impl QuestionMode {
    pub fn ensure_supported(&self) -> Result<()> {
        match self {
            QuestionMode::SelfQ => Ok(()),
            QuestionMode::PromptQ => Err(Error::UnsupportedQuestionMode("PromptQ")),
            QuestionMode::PhraseQ => Err(Error::UnsupportedQuestionMode("PhraseQ")),
        }
    }
}

/// Score one candidate scene under the chosen feedback mode. Only
/// `RandomScore` consumes randomness.
pub fn feedback_score(
    mode: FeedbackMode,
    judge: &JudgeSpec,
    scene: &Scene,
    questions: &[Question],
    rng: &mut Rng,
) -> Result<f64> {
    match mode {
        FeedbackMode::DiffOfProb => alignment_score(judge, scene, questions),
        FeedbackMode::RatioOfYes => {
            if questions.is_empty() {
                return Err(Error::EmptyQuestions);
            }
            let leaning_yes = questions
                .iter()
                .filter(|q| {
                    let (yes, no) = judge_answer(judge, scene, q);
                    yes > no
                })
                .count();
            Ok(leaning_yes as f64 / questions.len() as f64)
        }
        FeedbackMode::RandomScore => Ok(rng.next_f64()),
    }
}
