//! Divide-and-conquer question decomposition: one yes/no probe per prompt
//! fact, with participant-presence probes inserted ahead of every relation
//! probe.

use crate::domain::{Fact, ObjectId, PromptSpec, Question};
use crate::world::vocab::WorldVocab;

fn article_for(vocab: &WorldVocab, object: ObjectId) -> &'static str {
    match vocab.object_name(object).chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Deterministic surface form for one fact's yes/no probe.
pub fn question_text(vocab: &WorldVocab, fact: &Fact) -> String {
    match *fact {
        Fact::ObjectPresence { object } => format!(
            "Is there {} {}?",
            article_for(vocab, object),
            vocab.object_name(object)
        ),
        Fact::AttributeBinding { object, attribute } => {
            let attr = vocab.attribute_name(attribute);
            let article = match attr.chars().next() {
                Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
                _ => "a",
            };
            format!("Is there {article} {attr} {}?", vocab.object_name(object))
        }
        Fact::Count { object, count } => {
            if count == 1 {
                format!("Is there exactly one {}?", vocab.object_name(object))
            } else {
                format!(
                    "Are there exactly {} {}?",
                    vocab.count_word(count),
                    vocab.object_plural(object)
                )
            }
        }
        Fact::SpatialRelation {
            subject,
            relation,
            object,
        } => format!(
            "Is {} {} {} {} {}?",
            article_for(vocab, subject),
            vocab.object_name(subject),
            vocab.spatial_phrase(relation),
            article_for(vocab, object),
            vocab.object_name(object)
        ),
        Fact::SemanticRelation {
            subject,
            relation,
            object,
        } => format!(
            "Is {} {} {} {} {}?",
            article_for(vocab, subject),
            vocab.object_name(subject),
            vocab.semantic_gerund(relation),
            article_for(vocab, object),
            vocab.object_name(object)
        ),
    }
}

/// Decompose a prompt into atomic questions: one per fact, each relation
/// fact preceded by its two participant-presence probes, deduplicated while
/// preserving first-occurrence order.
pub fn decompose_questions(vocab: &WorldVocab, prompt: &PromptSpec) -> Vec<Question> {
    let mut facts: Vec<Fact> = Vec::new();
    let push = |f: Fact, facts: &mut Vec<Fact>| {
        if !facts.contains(&f) {
            facts.push(f);
        }
    };
    for fact in prompt.facts() {
        match *fact {
            Fact::SpatialRelation {
                subject, object, ..
            }
            | Fact::SemanticRelation {
                subject, object, ..
            } => {
                push(Fact::ObjectPresence { object: subject }, &mut facts);
                push(Fact::ObjectPresence { object }, &mut facts);
                push(*fact, &mut facts);
            }
            _ => push(*fact, &mut facts),
        }
    }
    facts
        .into_iter()
        .map(|fact| Question {
            text: question_text(vocab, &fact),
            fact,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttributeId, Category, FactKind, SpatialRelId};

    fn vocab() -> WorldVocab {
        WorldVocab::standard()
    }

    #[test]
    fn attribute_prompt_yields_presence_then_binding() {
        let v = vocab();
        let prompt = PromptSpec::new(
            "t0".into(),
            Category::Attribute,
            vec![
                Fact::ObjectPresence { object: ObjectId(9) },
                Fact::AttributeBinding {
                    object: ObjectId(9),
                    attribute: AttributeId(0),
                },
            ],
            "A white harp".into(),
        )
        .unwrap();
        let qs = decompose_questions(&v, &prompt);
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].text, "Is there a harp?");
        assert_eq!(qs[1].text, "Is there a white harp?");
    }

    #[test]
    fn spatial_prompt_yields_three_questions_in_participants_first_order() {
        let v = vocab();
        let prompt = PromptSpec::new(
            "t1".into(),
            Category::Layout,
            vec![
                Fact::ObjectPresence { object: ObjectId(5) },
                Fact::ObjectPresence { object: ObjectId(6) },
                Fact::SpatialRelation {
                    subject: ObjectId(5),
                    relation: SpatialRelId(0),
                    object: ObjectId(6),
                },
            ],
            "A pancake to the left of a pasta".into(),
        )
        .unwrap();
        let qs = decompose_questions(&v, &prompt);
        assert_eq!(qs.len(), 3);
        assert_eq!(qs[0].text, "Is there a pancake?");
        assert_eq!(qs[1].text, "Is there a pasta?");
        assert_eq!(qs[2].text, "Is a pancake to the left of a pasta?");
    }

    #[test]
    fn relation_without_explicit_presence_facts_still_probes_participants() {
        let v = vocab();
        let prompt = PromptSpec::new(
            "t2".into(),
            Category::Layout,
            vec![Fact::SpatialRelation {
                subject: ObjectId(0),
                relation: SpatialRelId(2),
                object: ObjectId(1),
            }],
            "A cat above a dog".into(),
        )
        .unwrap();
        let qs = decompose_questions(&v, &prompt);
        assert_eq!(qs.len(), 3);
        assert_eq!(qs[0].fact.kind(), FactKind::ObjectPresence);
        assert_eq!(qs[1].fact.kind(), FactKind::ObjectPresence);
        assert_eq!(qs[2].fact.kind(), FactKind::SpatialRelation);
    }

    #[test]
    fn decomposition_is_lossless_and_duplicate_free() {
        use crate::rng::Rng;
        use crate::world::prompts::generate_prompts;
        let v = vocab();
        let rng = Rng::new(50);
        for category in Category::ALL {
            for prompt in generate_prompts(&v, category, 150, &rng).unwrap() {
                let qs = decompose_questions(&v, &prompt);
                assert!(!qs.is_empty());
                // Every prompt fact is probed by exactly one question.
                for fact in prompt.facts() {
                    assert_eq!(qs.iter().filter(|q| &q.fact == fact).count(), 1);
                }
                // No duplicate probes.
                for (i, q) in qs.iter().enumerate() {
                    assert!(qs[i + 1..].iter().all(|r| r.fact != q.fact));
                }
            }
        }
    }

    #[test]
    fn count_question_switches_number() {
        let v = vocab();
        let one = Fact::Count {
            object: ObjectId(0),
            count: 1,
        };
        let many = Fact::Count {
            object: ObjectId(0),
            count: 4,
        };
        assert_eq!(question_text(&v, &one), "Is there exactly one cat?");
        assert_eq!(question_text(&v, &many), "Are there exactly four cats?");
    }
}
