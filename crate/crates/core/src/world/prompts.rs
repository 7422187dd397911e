//! Template-based prompt generation over the four compositional categories.
//!
//! Every template first assembles a fact list and then renders the prompt
//! text from those facts alone, so the text is always a pure function of the
//! facts and the two can never drift apart.

use crate::domain::{AttributeId, Category, Fact, ObjectId, PromptSpec, SemanticRelId, SpatialRelId};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::world::vocab::WorldVocab;

fn indefinite_article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Per-object rendering state gathered from a fact list.
struct NounPhrase {
    object: ObjectId,
    attributes: Vec<AttributeId>,
    count: Option<u8>,
}

impl NounPhrase {
    fn render(&self, vocab: &WorldVocab) -> String {
        let adjectives = self
            .attributes
            .iter()
            .map(|&a| vocab.attribute_name(a))
            .collect::<Vec<_>>()
            .join(" ");
        let noun = |plural: bool| {
            if plural {
                vocab.object_plural(self.object)
            } else {
                vocab.object_name(self.object)
            }
        };
        let core = |plural: bool| {
            if adjectives.is_empty() {
                noun(plural).to_string()
            } else {
                format!("{adjectives} {}", noun(plural))
            }
        };
        match self.count {
            Some(1) => format!("{} {}", vocab.count_word(1), core(false)),
            Some(n) => format!("{} {}", vocab.count_word(n), core(true)),
            None => {
                let body = core(false);
                format!("{} {body}", indefinite_article(&body))
            }
        }
    }
}

/// Render prompt text from a fact list: noun phrases in first-appearance
/// order, joined by the first relation's phrase when one is present and by
/// "and" otherwise.
pub fn render_prompt_text(vocab: &WorldVocab, facts: &[Fact]) -> String {
    let mut phrases: Vec<NounPhrase> = Vec::new();
    let index_of = |object: ObjectId, phrases: &mut Vec<NounPhrase>| -> usize {
        if let Some(i) = phrases.iter().position(|p| p.object == object) {
            i
        } else {
            phrases.push(NounPhrase {
                object,
                attributes: Vec::new(),
                count: None,
            });
            phrases.len() - 1
        }
    };
    let mut relation: Option<(ObjectId, String, ObjectId)> = None;
    for fact in facts {
        match *fact {
            Fact::ObjectPresence { object } => {
                index_of(object, &mut phrases);
            }
            Fact::AttributeBinding { object, attribute } => {
                let i = index_of(object, &mut phrases);
                phrases[i].attributes.push(attribute);
            }
            Fact::Count { object, count } => {
                let i = index_of(object, &mut phrases);
                phrases[i].count = Some(count);
            }
            Fact::SpatialRelation {
                subject,
                relation: rel,
                object,
            } => {
                index_of(subject, &mut phrases);
                index_of(object, &mut phrases);
                if relation.is_none() {
                    relation = Some((subject, vocab.spatial_phrase(rel).to_string(), object));
                }
            }
            Fact::SemanticRelation {
                subject,
                relation: rel,
                object,
            } => {
                index_of(subject, &mut phrases);
                index_of(object, &mut phrases);
                if relation.is_none() {
                    relation = Some((subject, vocab.semantic_gerund(rel).to_string(), object));
                }
            }
        }
    }
    let rendered: Vec<(ObjectId, String)> = phrases
        .iter()
        .map(|p| (p.object, p.render(vocab)))
        .collect();
    let mut text = match &relation {
        Some((s, phrase, o)) => {
            let np = |id: &ObjectId| {
                rendered
                    .iter()
                    .find(|(obj, _)| obj == id)
                    .map(|(_, t)| t.clone())
                    .unwrap_or_default()
            };
            let mut out = format!("{} {phrase} {}", np(s), np(o));
            for (obj, t) in &rendered {
                if obj != s && obj != o {
                    out.push_str(" and ");
                    out.push_str(t);
                }
            }
            out
        }
        None => rendered
            .iter()
            .map(|(_, t)| t.as_str())
            .collect::<Vec<_>>()
            .join(" and "),
    };
    if let Some(first) = text.get(0..1) {
        let upper = first.to_uppercase();
        text.replace_range(0..1, &upper);
    }
    text
}

fn pick_object(vocab: &WorldVocab, rng: &mut Rng) -> ObjectId {
    ObjectId(rng.gen_range(vocab.object_count()) as u16)
}

fn pick_distinct_object(vocab: &WorldVocab, rng: &mut Rng, other: ObjectId) -> ObjectId {
    loop {
        let o = pick_object(vocab, rng);
        if o != other {
            return o;
        }
    }
}

fn pick_attribute(vocab: &WorldVocab, rng: &mut Rng) -> AttributeId {
    AttributeId(rng.gen_range(vocab.attribute_count()) as u16)
}

fn pick_count(vocab: &WorldVocab, rng: &mut Rng) -> u8 {
    rng.gen_range(vocab.max_count() as usize) as u8 + 1
}

fn pick_spatial(vocab: &WorldVocab, rng: &mut Rng) -> SpatialRelId {
    SpatialRelId(rng.gen_range(vocab.spatial_count()) as u16)
}

fn pick_semantic(vocab: &WorldVocab, rng: &mut Rng) -> SemanticRelId {
    SemanticRelId(rng.gen_range(vocab.semantic_count()) as u16)
}

fn attribute_facts(vocab: &WorldVocab, rng: &mut Rng) -> Vec<Fact> {
    match rng.gen_range(2) {
        // "a {adj} {noun}"
        0 => {
            let o = pick_object(vocab, rng);
            vec![
                Fact::ObjectPresence { object: o },
                Fact::AttributeBinding {
                    object: o,
                    attribute: pick_attribute(vocab, rng),
                },
            ]
        }
        // "a {adj1} {noun1} and a {adj2} {noun2}"
        _ => {
            let o1 = pick_object(vocab, rng);
            let o2 = pick_distinct_object(vocab, rng, o1);
            vec![
                Fact::ObjectPresence { object: o1 },
                Fact::AttributeBinding {
                    object: o1,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::ObjectPresence { object: o2 },
                Fact::AttributeBinding {
                    object: o2,
                    attribute: pick_attribute(vocab, rng),
                },
            ]
        }
    }
}

fn layout_facts(vocab: &WorldVocab, rng: &mut Rng) -> Vec<Fact> {
    match rng.gen_range(3) {
        // "{quantity} {nouns}"
        0 => {
            let o = pick_object(vocab, rng);
            vec![
                Fact::ObjectPresence { object: o },
                Fact::Count {
                    object: o,
                    count: pick_count(vocab, rng),
                },
            ]
        }
        // "{quantity} {nouns1} and {quantity} {nouns2}"
        1 => {
            let o1 = pick_object(vocab, rng);
            let o2 = pick_distinct_object(vocab, rng, o1);
            vec![
                Fact::ObjectPresence { object: o1 },
                Fact::Count {
                    object: o1,
                    count: pick_count(vocab, rng),
                },
                Fact::ObjectPresence { object: o2 },
                Fact::Count {
                    object: o2,
                    count: pick_count(vocab, rng),
                },
            ]
        }
        // "a {noun1} {spatial phrase} a {noun2}"
        _ => {
            let s = pick_object(vocab, rng);
            let o = pick_distinct_object(vocab, rng, s);
            vec![
                Fact::ObjectPresence { object: s },
                Fact::ObjectPresence { object: o },
                Fact::SpatialRelation {
                    subject: s,
                    relation: pick_spatial(vocab, rng),
                    object: o,
                },
            ]
        }
    }
}

fn semantic_facts(vocab: &WorldVocab, rng: &mut Rng) -> Vec<Fact> {
    // "a {noun1} {gerund} a {noun2}"
    let s = pick_object(vocab, rng);
    let o = pick_distinct_object(vocab, rng, s);
    vec![
        Fact::ObjectPresence { object: s },
        Fact::ObjectPresence { object: o },
        Fact::SemanticRelation {
            subject: s,
            relation: pick_semantic(vocab, rng),
            object: o,
        },
    ]
}

fn complex_facts(vocab: &WorldVocab, rng: &mut Rng) -> Vec<Fact> {
    match rng.gen_range(5) {
        // "{quantity} {adj} {nouns}"
        0 => {
            let o = pick_object(vocab, rng);
            vec![
                Fact::ObjectPresence { object: o },
                Fact::AttributeBinding {
                    object: o,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::Count {
                    object: o,
                    count: pick_count(vocab, rng),
                },
            ]
        }
        // "a {adj1} {noun1} {spatial phrase} a {adj2} {noun2}"
        1 => {
            let s = pick_object(vocab, rng);
            let o = pick_distinct_object(vocab, rng, s);
            vec![
                Fact::ObjectPresence { object: s },
                Fact::AttributeBinding {
                    object: s,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::ObjectPresence { object: o },
                Fact::AttributeBinding {
                    object: o,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::SpatialRelation {
                    subject: s,
                    relation: pick_spatial(vocab, rng),
                    object: o,
                },
            ]
        }
        // "a {adj1} {noun1} {gerund} a {adj2} {noun2}"
        2 => {
            let s = pick_object(vocab, rng);
            let o = pick_distinct_object(vocab, rng, s);
            vec![
                Fact::ObjectPresence { object: s },
                Fact::AttributeBinding {
                    object: s,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::ObjectPresence { object: o },
                Fact::AttributeBinding {
                    object: o,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::SemanticRelation {
                    subject: s,
                    relation: pick_semantic(vocab, rng),
                    object: o,
                },
            ]
        }
        // "{quantity} {nouns1} {gerund} a {noun2}"
        3 => {
            let s = pick_object(vocab, rng);
            let o = pick_distinct_object(vocab, rng, s);
            vec![
                Fact::ObjectPresence { object: s },
                Fact::Count {
                    object: s,
                    count: pick_count(vocab, rng),
                },
                Fact::ObjectPresence { object: o },
                Fact::SemanticRelation {
                    subject: s,
                    relation: pick_semantic(vocab, rng),
                    object: o,
                },
            ]
        }
        // "{quantity} {adj} {nouns1} {gerund} a {noun2}"
        _ => {
            let s = pick_object(vocab, rng);
            let o = pick_distinct_object(vocab, rng, s);
            vec![
                Fact::ObjectPresence { object: s },
                Fact::AttributeBinding {
                    object: s,
                    attribute: pick_attribute(vocab, rng),
                },
                Fact::Count {
                    object: s,
                    count: pick_count(vocab, rng),
                },
                Fact::ObjectPresence { object: o },
                Fact::SemanticRelation {
                    subject: s,
                    relation: pick_semantic(vocab, rng),
                    object: o,
                },
            ]
        }
    }
}

/// Generate `n` prompts of one category. Each prompt draws from its own
/// derived stream, so prompt `i` is independent of `n` and of generation
/// order.
pub fn generate_prompts(
    vocab: &WorldVocab,
    category: Category,
    n: usize,
    rng: &Rng,
) -> Result<Vec<PromptSpec>> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "prompt count must be at least 1".into(),
        ));
    }
    let salt = rng.split("corpus-salt").next_u64();
    (0..n)
        .map(|i| {
            let mut prng = rng.split_indexed("prompt", i as u64);
            let facts = match category {
                Category::Attribute => attribute_facts(vocab, &mut prng),
                Category::Layout => layout_facts(vocab, &mut prng),
                Category::SemanticRelation => semantic_facts(vocab, &mut prng),
                Category::Complex => complex_facts(vocab, &mut prng),
            };
            let text = render_prompt_text(vocab, &facts);
            PromptSpec::new(
                format!("{}-{salt:016x}-{i:05}", category.name()),
                category,
                facts,
                text,
            )
        })
        .collect()
}
