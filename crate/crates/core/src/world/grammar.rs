//! Discrete scene decoder: a fixed token grammar parsed leniently.
//!
//! Layout of the token space: one padding token, then object classes,
//! attributes, counts, and relations (spatial first, then semantic). A slot
//! is `OBJ [ATTR]? [COUNT]? (REL OBJ)*`; padding is a no-op anywhere, and
//! malformed subsequences are skipped rather than rejected.

use crate::domain::{
    AttributeId, Fact, ObjectId, Scene, SemanticRelId, SpatialRelId, TokenSequence,
};
use crate::world::vocab::WorldVocab;

#[derive(Clone, Copy, Debug)]
pub struct TokenGrammar {
    n_objects: u32,
    n_attributes: u32,
    n_counts: u32,
    n_spatial: u32,
    n_semantic: u32,
}

pub const PAD_TOKEN: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tok {
    Obj(u16),
    Attr(u16),
    Count(u8),
    Rel(u16),
}

impl TokenGrammar {
    pub fn standard(vocab: &WorldVocab) -> Self {
        TokenGrammar {
            n_objects: vocab.object_count() as u32,
            n_attributes: vocab.attribute_count() as u32,
            n_counts: vocab.max_count() as u32,
            n_spatial: vocab.spatial_count() as u32,
            n_semantic: vocab.semantic_count() as u32,
        }
    }

    /// Smallest vocab size that can express every grammar token.
    pub fn min_vocab(&self) -> u32 {
        1 + self.n_objects + self.n_attributes + self.n_counts + self.n_spatial + self.n_semantic
    }

    fn attr_base(&self) -> u32 {
        1 + self.n_objects
    }

    fn count_base(&self) -> u32 {
        self.attr_base() + self.n_attributes
    }

    fn rel_base(&self) -> u32 {
        self.count_base() + self.n_counts
    }

    pub fn object_token(&self, id: ObjectId) -> u32 {
        1 + id.0 as u32
    }

    pub fn attribute_token(&self, id: AttributeId) -> u32 {
        self.attr_base() + id.0 as u32
    }

    /// Token for a count in 1..=9.
    pub fn count_token(&self, count: u8) -> u32 {
        self.count_base() + count as u32 - 1
    }

    pub fn spatial_token(&self, id: SpatialRelId) -> u32 {
        self.rel_base() + id.0 as u32
    }

    pub fn semantic_token(&self, id: SemanticRelId) -> u32 {
        self.rel_base() + self.n_spatial + id.0 as u32
    }

    /// Padding and out-of-grammar tokens classify to `None`.
    fn classify(&self, token: u32) -> Option<Tok> {
        if token == PAD_TOKEN || token >= self.min_vocab() {
            return None;
        }
        let t = token - 1;
        if t < self.n_objects {
            return Some(Tok::Obj(t as u16));
        }
        let t = t - self.n_objects;
        if t < self.n_attributes {
            return Some(Tok::Attr(t as u16));
        }
        let t = t - self.n_attributes;
        if t < self.n_counts {
            return Some(Tok::Count(t as u8 + 1));
        }
        Some(Tok::Rel((t - self.n_counts) as u16))
    }

    fn relation_fact(&self, subject: ObjectId, rel: u16, object: ObjectId) -> Fact {
        if (rel as u32) < self.n_spatial {
            Fact::SpatialRelation {
                subject,
                relation: SpatialRelId(rel),
                object,
            }
        } else {
            Fact::SemanticRelation {
                subject,
                relation: SemanticRelId(rel - self.n_spatial as u16),
                object,
            }
        }
    }

    /// Lenient parse of a token stream into a scene.
    pub fn decode(&self, z: &TokenSequence) -> Scene {
        let mut facts: Vec<Fact> = Vec::new();
        let mut subject: Option<ObjectId> = None;
        let mut pending_rel: Option<u16> = None;
        let mut attr_done = false;
        let mut count_done = false;
        for &token in z.tokens() {
            let Some(tok) = self.classify(token) else {
                continue;
            };
            match tok {
                Tok::Obj(c) => {
                    let object = ObjectId(c);
                    if let (Some(s), Some(r)) = (subject, pending_rel) {
                        facts.push(self.relation_fact(s, r, object));
                        facts.push(Fact::ObjectPresence { object });
                        pending_rel = None;
                    } else {
                        facts.push(Fact::ObjectPresence { object });
                        subject = Some(object);
                        attr_done = false;
                        count_done = false;
                    }
                }
                Tok::Attr(a) => {
                    pending_rel = None;
                    if let Some(s) = subject {
                        if !attr_done {
                            facts.push(Fact::AttributeBinding {
                                object: s,
                                attribute: AttributeId(a),
                            });
                            attr_done = true;
                        }
                    }
                }
                Tok::Count(n) => {
                    pending_rel = None;
                    if let Some(s) = subject {
                        if !count_done {
                            facts.push(Fact::Count { object: s, count: n });
                            count_done = true;
                        }
                    }
                }
                Tok::Rel(r) => {
                    if subject.is_some() {
                        pending_rel = Some(r);
                    }
                }
            }
        }
        Scene::from_facts(facts)
    }
}
