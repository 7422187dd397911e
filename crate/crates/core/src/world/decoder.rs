//! Continuous scene decoder: fixed random linear readouts over a feature
//! matrix, thresholded into slot-wise presence/class/attribute/count facts
//! plus pairwise relation facts. The decoder is frozen at construction and
//! never trained; optimization pressure must flow through the representation
//! instead.

use crate::domain::{AttributeId, Fact, ObjectId, Scene, SemanticRelId, SpatialRelId};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::Rng;
use crate::world::vocab::WorldVocab;
use serde::{Deserialize, Serialize};

/// Shape and threshold settings for the continuous decoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    /// Number of object slots read out of the feature matrix.
    pub slots: usize,
    /// A slot is active when its presence logit strictly exceeds this.
    pub presence_threshold: f64,
    /// A pair emits its best relation when the logit strictly exceeds this.
    pub relation_threshold: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            slots: 4,
            // Zero thresholds keep the decode invariant under positive
            // rescaling of the features, matching the cosine kernels.
            presence_threshold: 0.0,
            relation_threshold: 0.0,
        }
    }
}

/// Frozen random readout matrices mapping a feature matrix to per-slot
/// logits.
#[derive(Clone, Debug)]
pub struct DecoderSpec {
    slots: usize,
    presence_threshold: f64,
    relation_threshold: f64,
    feature_rows: usize,
    feature_cols: usize,
    n_objects: usize,
    n_attributes: usize,
    n_spatial: usize,
    n_semantic: usize,
    presence_w: Vec<f64>,
    class_w: Vec<f64>,
    attr_w: Vec<f64>,
    count_w: Vec<f64>,
    rel_w: Vec<f64>,
}

const COUNT_CHOICES: usize = 9;

fn fill_normal(rng: &mut Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.normal() * scale).collect()
}

impl DecoderSpec {
    pub fn new(
        vocab: &WorldVocab,
        cfg: &DecoderConfig,
        feature_rows: usize,
        feature_cols: usize,
        seed: u64,
    ) -> Result<Self> {
        if cfg.slots == 0 {
            return Err(Error::InvalidConfig("decoder needs at least one slot".into()));
        }
        if feature_rows == 0 || feature_cols == 0 {
            return Err(Error::EmptyShape {
                rows: feature_rows,
                cols: feature_cols,
            });
        }
        if !(cfg.presence_threshold.is_finite() && cfg.relation_threshold.is_finite()) {
            return Err(Error::InvalidConfig(
                "decoder thresholds must be finite".into(),
            ));
        }
        let dim = feature_rows * feature_cols;
        let scale = 1.0 / (dim as f64).sqrt();
        let root = Rng::new(seed).split("decoder-readouts");
        let slots = cfg.slots;
        let n_objects = vocab.object_count();
        let n_attributes = vocab.attribute_count();
        let n_spatial = vocab.spatial_count();
        let n_semantic = vocab.semantic_count();
        let n_rel = n_spatial + n_semantic;
        let pairs = slots * (slots - 1);
        Ok(DecoderSpec {
            slots,
            presence_threshold: cfg.presence_threshold,
            relation_threshold: cfg.relation_threshold,
            feature_rows,
            feature_cols,
            n_objects,
            n_attributes,
            n_spatial,
            n_semantic,
            presence_w: fill_normal(&mut root.split("presence"), slots * dim, scale),
            class_w: fill_normal(&mut root.split("class"), slots * n_objects * dim, scale),
            attr_w: fill_normal(&mut root.split("attribute"), slots * n_attributes * dim, scale),
            count_w: fill_normal(&mut root.split("count"), slots * COUNT_CHOICES * dim, scale),
            rel_w: fill_normal(&mut root.split("relation"), pairs * n_rel * dim, scale),
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn feature_shape(&self) -> (usize, usize) {
        (self.feature_rows, self.feature_cols)
    }

    fn dim(&self) -> usize {
        self.feature_rows * self.feature_cols
    }

    /// Dense index of the ordered active-slot pair (i, j), i != j.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.slots && j < self.slots);
        i * (self.slots - 1) + if j < i { j } else { j - 1 }
    }

    pub fn presence_weights(&self, slot: usize) -> &[f64] {
        let d = self.dim();
        &self.presence_w[slot * d..(slot + 1) * d]
    }

    pub fn class_weights(&self, slot: usize, class: usize) -> &[f64] {
        let d = self.dim();
        let row = slot * self.n_objects + class;
        &self.class_w[row * d..(row + 1) * d]
    }

    pub fn attribute_weights(&self, slot: usize, attribute: usize) -> &[f64] {
        let d = self.dim();
        let row = slot * self.n_attributes + attribute;
        &self.attr_w[row * d..(row + 1) * d]
    }

    pub fn count_weights(&self, slot: usize, count_index: usize) -> &[f64] {
        let d = self.dim();
        let row = slot * COUNT_CHOICES + count_index;
        &self.count_w[row * d..(row + 1) * d]
    }

    pub fn relation_weights(&self, pair: usize, relation: usize) -> &[f64] {
        let d = self.dim();
        let n_rel = self.n_spatial + self.n_semantic;
        let row = pair * n_rel + relation;
        &self.rel_w[row * d..(row + 1) * d]
    }

    fn check_shape(&self, h: &FeatureMatrix) -> Result<()> {
        if h.shape() != (self.feature_rows, self.feature_cols) {
            return Err(Error::ShapeMismatch {
                left_rows: self.feature_rows,
                left_cols: self.feature_cols,
                right_rows: h.rows(),
                right_cols: h.cols(),
            });
        }
        Ok(())
    }

    /// Deterministic threshold/argmax readout of a feature matrix into a
    /// symbolic scene.
    pub fn decode_continuous(&self, h: &FeatureMatrix) -> Result<Scene> {
        self.check_shape(h)?;
        let x = h.as_slice();
        let mut facts: Vec<Fact> = Vec::new();
        let mut slot_class: Vec<Option<ObjectId>> = vec![None; self.slots];
        for (slot, slot_entry) in slot_class.iter_mut().enumerate() {
            if dot(self.presence_weights(slot), x) <= self.presence_threshold {
                continue;
            }
            let class = argmax((0..self.n_objects).map(|c| dot(self.class_weights(slot, c), x)));
            let attribute =
                argmax((0..self.n_attributes).map(|a| dot(self.attribute_weights(slot, a), x)));
            let count =
                argmax((0..COUNT_CHOICES).map(|n| dot(self.count_weights(slot, n), x)));
            let object = ObjectId(class as u16);
            *slot_entry = Some(object);
            facts.push(Fact::ObjectPresence { object });
            facts.push(Fact::AttributeBinding {
                object,
                attribute: AttributeId(attribute as u16),
            });
            facts.push(Fact::Count {
                object,
                count: count as u8 + 1,
            });
        }
        let n_rel = self.n_spatial + self.n_semantic;
        for i in 0..self.slots {
            let Some(subject) = slot_class[i] else { continue };
            for (j, &other) in slot_class.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Some(object) = other else { continue };
                let pair = self.pair_index(i, j);
                let logits: Vec<f64> = (0..n_rel)
                    .map(|r| dot(self.relation_weights(pair, r), x))
                    .collect();
                let best = argmax(logits.iter().copied());
                if logits[best] <= self.relation_threshold {
                    continue;
                }
                facts.push(if best < self.n_spatial {
                    Fact::SpatialRelation {
                        subject,
                        relation: SpatialRelId(best as u16),
                        object,
                    }
                } else {
                    Fact::SemanticRelation {
                        subject,
                        relation: SemanticRelId((best - self.n_spatial) as u16),
                        object,
                    }
                });
            }
        }
        Ok(Scene::from_facts(facts))
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Index of the largest value; ties resolve to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(threshold: f64) -> DecoderSpec {
        let cfg = DecoderConfig {
            slots: 3,
            presence_threshold: threshold,
            relation_threshold: threshold,
        };
        DecoderSpec::new(&WorldVocab::standard(), &cfg, 4, 6, 77).unwrap()
    }

    fn random_features(seed: u64, rows: usize, cols: usize) -> FeatureMatrix {
        let mut rng = Rng::new(seed);
        FeatureMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn all_zero_features_with_positive_thresholds_decode_empty() {
        let dec = spec(0.5);
        let scene = dec.decode_continuous(&FeatureMatrix::zeros(4, 6)).unwrap();
        assert!(scene.is_empty());
    }

    #[test]
    fn decode_is_deterministic() {
        let dec = spec(0.0);
        let h = random_features(1, 4, 6);
        assert_eq!(
            dec.decode_continuous(&h).unwrap(),
            dec.decode_continuous(&h).unwrap()
        );
    }

    #[test]
    fn decode_matches_an_independent_readout_implementation() {
        let dec = spec(0.0);
        for seed in 0..100 {
            let h = random_features(seed, 4, 6);
            let got = dec.decode_continuous(&h).unwrap();
            let want = oracle_decode(&dec, &h);
            assert_eq!(got, want, "seed {seed}");
        }
    }

    // Re-implements the threshold/argmax readout directly from the exposed
    // weights, with its own argmax and fact assembly.
    fn oracle_decode(dec: &DecoderSpec, h: &FeatureMatrix) -> Scene {
        let vocab = WorldVocab::standard();
        let x = h.as_slice();
        let score = |w: &[f64]| -> f64 { w.iter().zip(x).map(|(a, b)| a * b).sum() };
        let pick = |scores: Vec<f64>| -> usize {
            let mut best = 0usize;
            for i in 1..scores.len() {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            best
        };
        let mut facts = Vec::new();
        let mut classes: Vec<Option<u16>> = vec![None; dec.slots()];
        for (s, class_entry) in classes.iter_mut().enumerate() {
            if score(dec.presence_weights(s)) <= 0.0 {
                continue;
            }
            let c = pick(
                (0..vocab.object_count())
                    .map(|k| score(dec.class_weights(s, k)))
                    .collect(),
            );
            *class_entry = Some(c as u16);
            let a = pick(
                (0..vocab.attribute_count())
                    .map(|k| score(dec.attribute_weights(s, k)))
                    .collect(),
            );
            let n = pick((0..9).map(|k| score(dec.count_weights(s, k))).collect());
            facts.push(Fact::ObjectPresence { object: ObjectId(c as u16) });
            facts.push(Fact::AttributeBinding {
                object: ObjectId(c as u16),
                attribute: AttributeId(a as u16),
            });
            facts.push(Fact::Count {
                object: ObjectId(c as u16),
                count: (n + 1) as u8,
            });
        }
        let n_rel = vocab.spatial_count() + vocab.semantic_count();
        for i in 0..dec.slots() {
            for j in 0..dec.slots() {
                if i == j {
                    continue;
                }
                let (Some(ci), Some(cj)) = (classes[i], classes[j]) else {
                    continue;
                };
                let pair = dec.pair_index(i, j);
                let logits: Vec<f64> =
                    (0..n_rel).map(|r| score(dec.relation_weights(pair, r))).collect();
                let best = pick(logits.clone());
                if logits[best] <= 0.0 {
                    continue;
                }
                if best < vocab.spatial_count() {
                    facts.push(Fact::SpatialRelation {
                        subject: ObjectId(ci),
                        relation: SpatialRelId(best as u16),
                        object: ObjectId(cj),
                    });
                } else {
                    facts.push(Fact::SemanticRelation {
                        subject: ObjectId(ci),
                        relation: SemanticRelId((best - vocab.spatial_count()) as u16),
                        object: ObjectId(cj),
                    });
                }
            }
        }
        Scene::from_facts(facts)
    }

    #[test]
    fn decode_is_sensitive_to_row_order() {
        // The readouts act on the flattened matrix, so permuting rows is not
        // a symmetry. Witness: some of these inputs must decode differently
        // after swapping two rows.
        let dec = spec(0.0);
        let mut any_differ = false;
        for seed in 0..10 {
            let h = random_features(seed, 4, 6);
            let mut swapped_rows: Vec<Vec<f64>> = (0..4).map(|i| h.row(i).to_vec()).collect();
            swapped_rows.swap(0, 3);
            let swapped = FeatureMatrix::from_rows(&swapped_rows).unwrap();
            if dec.decode_continuous(&h).unwrap() != dec.decode_continuous(&swapped).unwrap() {
                any_differ = true;
                break;
            }
        }
        assert!(any_differ);
    }

    #[test]
    fn decode_is_invariant_under_positive_rescaling_at_zero_thresholds() {
        let dec = spec(0.0);
        for seed in 0..20 {
            let h = random_features(seed, 4, 6);
            let scaled = h.map(|v| v * 3.5);
            assert_eq!(
                dec.decode_continuous(&h).unwrap(),
                dec.decode_continuous(&scaled).unwrap()
            );
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let dec = spec(0.0);
        let wrong = FeatureMatrix::zeros(3, 6);
        assert!(matches!(
            dec.decode_continuous(&wrong),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn construction_is_deterministic_in_the_seed() {
        let vocab = WorldVocab::standard();
        let cfg = DecoderConfig::default();
        let a = DecoderSpec::new(&vocab, &cfg, 8, 16, 5).unwrap();
        let b = DecoderSpec::new(&vocab, &cfg, 8, 16, 5).unwrap();
        let h = random_features(3, 8, 16);
        assert_eq!(a.decode_continuous(&h).unwrap(), b.decode_continuous(&h).unwrap());
        assert_eq!(a.presence_weights(0), b.presence_weights(0));
    }
}
