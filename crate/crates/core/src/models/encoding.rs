//! Fixed-width prompt encodings: a bag of embeddings over fact components.

use serde::{Deserialize, Serialize};

use crate::domain::{Fact, PromptSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed-width real vector summarizing a prompt. Deterministic in the prompt
/// facts and the embedding seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptEncoding {
    values: Vec<f64>,
}

impl PromptEncoding {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("prompt encoding"));
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "prompt encoding",
            });
        }
        Ok(PromptEncoding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn add_component(acc: &mut [f64], root: &Rng, label: &str, id: u64) {
    let mut stream = root.split_indexed(label, id);
    for slot in acc.iter_mut() {
        *slot += stream.normal();
    }
}

/// Encode a prompt as the mean over facts of summed component embeddings.
///
/// Each fact contributes embeddings for its participants plus a combined
/// component for the binding itself, so permutations of roles ("A left of B"
/// versus "B left of A") encode differently.
pub fn encode_prompt(prompt: &PromptSpec, dim: usize, embed_seed: u64) -> PromptEncoding {
    assert!(dim > 0, "encoding dim must be positive");
    let root = Rng::new(embed_seed).split("prompt-embedding");
    let mut acc = vec![0.0; dim];
    for fact in prompt.facts() {
        match *fact {
            Fact::ObjectPresence { object } => {
                add_component(&mut acc, &root, "object", object.0 as u64);
            }
            Fact::AttributeBinding { object, attribute } => {
                add_component(&mut acc, &root, "object", object.0 as u64);
                add_component(&mut acc, &root, "attribute", attribute.0 as u64);
                add_component(
                    &mut acc,
                    &root,
                    "attribute-binding",
                    (u64::from(object.0) << 16) | u64::from(attribute.0),
                );
            }
            Fact::Count { object, count } => {
                add_component(&mut acc, &root, "object", object.0 as u64);
                add_component(&mut acc, &root, "count", u64::from(count));
                add_component(
                    &mut acc,
                    &root,
                    "count-binding",
                    (u64::from(object.0) << 16) | u64::from(count),
                );
            }
            Fact::SpatialRelation {
                subject,
                relation,
                object,
            } => {
                add_component(&mut acc, &root, "subject", subject.0 as u64);
                add_component(&mut acc, &root, "rel-object", object.0 as u64);
                add_component(&mut acc, &root, "spatial-rel", relation.0 as u64);
                add_component(
                    &mut acc,
                    &root,
                    "spatial-triple",
                    (u64::from(subject.0) << 32)
                        | (u64::from(relation.0) << 16)
                        | u64::from(object.0),
                );
            }
            Fact::SemanticRelation {
                subject,
                relation,
                object,
            } => {
                add_component(&mut acc, &root, "subject", subject.0 as u64);
                add_component(&mut acc, &root, "rel-object", object.0 as u64);
                add_component(&mut acc, &root, "semantic-rel", relation.0 as u64);
                add_component(
                    &mut acc,
                    &root,
                    "semantic-triple",
                    (u64::from(subject.0) << 32)
                        | (u64::from(relation.0) << 16)
                        | u64::from(object.0),
                );
            }
        }
    }
    let scale = 1.0 / prompt.facts().len() as f64;
    for slot in &mut acc {
        *slot *= scale;
    }
    PromptEncoding { values: acc }
}
