//! Domain vocabulary ids, facts, prompts, questions, scenes, and token
//! sequences.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub u16);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_newtype!(
    /// Index into the world's object-class table.
    ObjectId
);
id_newtype!(
    /// Index into the world's attribute table (colors, shapes, textures).
    AttributeId
);
id_newtype!(
    /// Index into the world's spatial-relation table.
    SpatialRelId
);
id_newtype!(
    /// Index into the world's semantic-relation table.
    SemanticRelId
);

/// One atomic, checkable statement about a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Fact {
    ObjectPresence {
        object: ObjectId,
    },
    AttributeBinding {
        object: ObjectId,
        attribute: AttributeId,
    },
    Count {
        object: ObjectId,
        count: u8,
    },
    SpatialRelation {
        subject: ObjectId,
        relation: SpatialRelId,
        object: ObjectId,
    },
    SemanticRelation {
        subject: ObjectId,
        relation: SemanticRelId,
        object: ObjectId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactKind {
    ObjectPresence,
    AttributeBinding,
    Count,
    SpatialRelation,
    SemanticRelation,
}

impl Fact {
    pub fn kind(&self) -> FactKind {
        match self {
            Fact::ObjectPresence { .. } => FactKind::ObjectPresence,
            Fact::AttributeBinding { .. } => FactKind::AttributeBinding,
            Fact::Count { .. } => FactKind::Count,
            Fact::SpatialRelation { .. } => FactKind::SpatialRelation,
            Fact::SemanticRelation { .. } => FactKind::SemanticRelation,
        }
    }
}

/// The four compositional prompt categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Attribute,
    Layout,
    SemanticRelation,
    Complex,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Attribute,
        Category::Layout,
        Category::SemanticRelation,
        Category::Complex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Attribute => "Attribute",
            Category::Layout => "Layout",
            Category::SemanticRelation => "SemanticRelation",
            Category::Complex => "Complex",
        }
    }

    pub fn parse(s: &str) -> Result<Category> {
        match s {
            "Attribute" | "attribute" => Ok(Category::Attribute),
            "Layout" | "layout" => Ok(Category::Layout),
            "SemanticRelation" | "semantic-relation" | "semantic_relation" => {
                Ok(Category::SemanticRelation)
            }
            "Complex" | "complex" => Ok(Category::Complex),
            other => Err(Error::InvalidConfig(format!("unknown category: {other}"))),
        }
    }
}

/// A compositional prompt: unique id, category, the facts it asserts, and a
/// deterministic text rendering of those facts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub category: Category,
    facts: Vec<Fact>,
    pub text: String,
}

impl PromptSpec {
    pub fn new(id: String, category: Category, facts: Vec<Fact>, text: String) -> Result<Self> {
        if facts.is_empty() {
            return Err(Error::EmptyInput("prompt fact list"));
        }
        for fact in &facts {
            if let Fact::Count { count, .. } = fact {
                if !(1..=9).contains(count) {
                    return Err(Error::InvalidConfig(format!(
                        "count facts must lie in 1..=9, got {count}"
                    )));
                }
            }
        }
        if !category_consistent(category, &facts) {
            return Err(Error::InvalidConfig(format!(
                "fact kinds are inconsistent with category {}",
                category.name()
            )));
        }
        Ok(PromptSpec {
            id,
            category,
            facts,
            text,
        })
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }
}

fn category_consistent(category: Category, facts: &[Fact]) -> bool {
    let has = |kind: FactKind| facts.iter().any(|f| f.kind() == kind);
    let only = |allowed: &[FactKind]| facts.iter().all(|f| allowed.contains(&f.kind()));
    match category {
        Category::Attribute => {
            only(&[FactKind::ObjectPresence, FactKind::AttributeBinding])
                && has(FactKind::AttributeBinding)
        }
        Category::Layout => {
            only(&[
                FactKind::ObjectPresence,
                FactKind::Count,
                FactKind::SpatialRelation,
            ]) && (has(FactKind::Count) || has(FactKind::SpatialRelation))
        }
        Category::SemanticRelation => {
            only(&[FactKind::ObjectPresence, FactKind::SemanticRelation])
                && has(FactKind::SemanticRelation)
        }
        Category::Complex => {
            // Composes at least two of the three ingredient families.
            let groups = [
                has(FactKind::AttributeBinding),
                has(FactKind::Count) || has(FactKind::SpatialRelation),
                has(FactKind::SemanticRelation),
            ];
            groups.iter().filter(|&&g| g).count() >= 2
        }
    }
}

/// A yes/no probe derived from a single fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub fact: Fact,
    pub text: String,
}

/// Symbolic decoded image: a deduplicated, ordered set of facts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    facts: BTreeSet<Fact>,
}

impl Scene {
    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Self {
        Scene {
            facts: facts.into_iter().collect(),
        }
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// Discrete intermediate representation: token ids below a fixed vocab size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTokenSequence")]
pub struct TokenSequence {
    tokens: Vec<u32>,
    vocab_size: u32,
}

#[derive(Deserialize)]
struct RawTokenSequence {
    tokens: Vec<u32>,
    vocab_size: u32,
}

impl TryFrom<RawTokenSequence> for TokenSequence {
    type Error = Error;

    fn try_from(raw: RawTokenSequence) -> Result<Self> {
        TokenSequence::new(raw.tokens, raw.vocab_size)
    }
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, vocab_size: u32) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(Error::TokenOutOfRange {
                token: bad,
                vocab: vocab_size,
            });
        }
        Ok(TokenSequence { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_sequence_rejects_out_of_range_ids() {
        assert!(TokenSequence::new(vec![0, 5], 5).is_err());
        assert!(TokenSequence::new(vec![], 5).is_err());
        assert!(TokenSequence::new(vec![0, 4], 5).is_ok());
    }

    #[test]
    fn scene_deduplicates_facts() {
        let f = Fact::ObjectPresence { object: ObjectId(3) };
        let scene = Scene::from_facts([f, f]);
        assert_eq!(scene.len(), 1);
        assert!(scene.contains(&f));
    }

    #[test]
    fn scene_serializes_facts_in_sorted_order() {
        let a = Fact::ObjectPresence { object: ObjectId(9) };
        let b = Fact::ObjectPresence { object: ObjectId(1) };
        let scene = Scene::from_facts([a, b]);
        let text = serde_json::to_string(&scene).unwrap();
        let lo = text.find(r#""object":1"#).unwrap();
        let hi = text.find(r#""object":9"#).unwrap();
        assert!(lo < hi, "facts must serialize sorted: {text}");
    }

    #[test]
    fn prompt_category_consistency_is_enforced() {
        let presence = Fact::ObjectPresence { object: ObjectId(0) };
        let attr = Fact::AttributeBinding {
            object: ObjectId(0),
            attribute: AttributeId(1),
        };
        let sem = Fact::SemanticRelation {
            subject: ObjectId(0),
            relation: SemanticRelId(0),
            object: ObjectId(1),
        };
        assert!(PromptSpec::new(
            "p0".into(),
            Category::Attribute,
            vec![presence, attr],
            "A white cat".into(),
        )
        .is_ok());
        // A semantic fact does not belong in an Attribute prompt.
        assert!(PromptSpec::new(
            "p1".into(),
            Category::Attribute,
            vec![presence, sem],
            "bad".into(),
        )
        .is_err());
        // Attribute prompts need at least one binding.
        assert!(PromptSpec::new(
            "p2".into(),
            Category::Attribute,
            vec![presence],
            "bad".into(),
        )
        .is_err());
        // Complex prompts need at least two ingredient families.
        assert!(PromptSpec::new(
            "p3".into(),
            Category::Complex,
            vec![presence, attr, sem],
            "ok".into(),
        )
        .is_ok());
        assert!(PromptSpec::new(
            "p4".into(),
            Category::Complex,
            vec![presence, attr],
            "bad".into(),
        )
        .is_err());
    }

    #[test]
    fn count_range_is_validated() {
        let bad = Fact::Count {
            object: ObjectId(0),
            count: 0,
        };
        assert!(PromptSpec::new("c".into(), Category::Layout, vec![bad], "x".into()).is_err());
        let ok = Fact::Count {
            object: ObjectId(0),
            count: 9,
        };
        assert!(PromptSpec::new("c".into(), Category::Layout, vec![ok], "x".into()).is_ok());
    }
}
