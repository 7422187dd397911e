//! Held-out evaluation metric: the fraction of prompt facts a scene
//! satisfies. This plays the role of an external expert scorer and must stay
//! invisible to the training loop, which only ever sees judge feedback.

use crate::domain::{PromptSpec, Scene};

/// Fraction of the prompt's facts present in the scene, in [0, 1].
pub fn ground_truth_score(prompt: &PromptSpec, scene: &Scene) -> f64 {
    let facts = prompt.facts();
    let satisfied = facts.iter().filter(|f| scene.contains(f)).count();
    satisfied as f64 / facts.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Category, Fact, ObjectId};
    use crate::rng::Rng;
    use crate::world::prompts::generate_prompts;
    use crate::world::vocab::WorldVocab;

    #[test]
    fn superset_scene_scores_one_and_empty_scene_scores_zero() {
        let vocab = WorldVocab::standard();
        let rng = Rng::new(60);
        for category in Category::ALL {
            for prompt in generate_prompts(&vocab, category, 40, &rng).unwrap() {
                let mut facts: Vec<Fact> = prompt.facts().to_vec();
                facts.push(Fact::ObjectPresence { object: ObjectId(20) });
                let full = Scene::from_facts(facts);
                assert_eq!(ground_truth_score(&prompt, &full), 1.0);
                assert_eq!(ground_truth_score(&prompt, &Scene::default()), 0.0);
            }
        }
    }

    #[test]
    fn partial_scenes_score_the_exact_fraction() {
        let vocab = WorldVocab::standard();
        let rng = Rng::new(61);
        for prompt in generate_prompts(&vocab, Category::Complex, 60, &rng).unwrap() {
            let facts = prompt.facts();
            for keep in 0..=facts.len() {
                let scene = Scene::from_facts(facts[..keep].iter().copied());
                // The prompt's fact list can only contain distinct facts per
                // template construction, so the fraction is exact.
                let got = ground_truth_score(&prompt, &scene);
                let want = keep as f64 / facts.len() as f64;
                assert!((got - want).abs() < 1e-15);
            }
        }
    }
}
