//! Fixed world vocabulary: object classes, grouped attributes, relation
//! phrases, and count words. Ids are table indices and never change, so any
//! serialized fact stays readable across runs.

use crate::domain::{AttributeId, ObjectId, SemanticRelId, SpatialRelId};

/// Singular and plural surface forms for one object class.
#[derive(Clone, Copy, Debug)]
struct Noun {
    singular: &'static str,
    plural: &'static str,
}

const fn noun(singular: &'static str, plural: &'static str) -> Noun {
    Noun { singular, plural }
}

/// Object classes spanning animals, food, instruments, vehicles, and
/// household things.
const OBJECTS: [Noun; 21] = [
    noun("cat", "cats"),
    noun("dog", "dogs"),
    noun("rabbit", "rabbits"),
    noun("horse", "horses"),
    noun("owl", "owls"),
    noun("pancake", "pancakes"),
    noun("pasta", "pastas"),
    noun("apple", "apples"),
    noun("sandwich", "sandwiches"),
    noun("harp", "harps"),
    noun("guitar", "guitars"),
    noun("trumpet", "trumpets"),
    noun("bicycle", "bicycles"),
    noun("tractor", "tractors"),
    noun("canoe", "canoes"),
    noun("bench", "benches"),
    noun("lantern", "lanterns"),
    noun("mirror", "mirrors"),
    noun("kettle", "kettles"),
    noun("umbrella", "umbrellas"),
    noun("backpack", "backpacks"),
];

const COLORS: [&str; 7] = ["white", "black", "red", "blue", "green", "yellow", "purple"];
const SHAPES: [&str; 5] = ["round", "square", "triangular", "oval", "hexagonal"];
const TEXTURES: [&str; 5] = ["striped", "spotted", "fluffy", "metallic", "wooden"];

const SPATIAL: [&str; 6] = [
    "to the left of",
    "to the right of",
    "above",
    "below",
    "in front of",
    "behind",
];

const SEMANTIC: [&str; 8] = [
    "holding",
    "watching",
    "riding",
    "chasing",
    "touching",
    "facing",
    "pulling",
    "carrying",
];

const COUNT_WORDS: [&str; 9] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Which family an attribute id belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttributeGroup {
    Color,
    Shape,
    Texture,
}

/// The fixed vocabulary every run shares. Construct via [`WorldVocab::standard`].
#[derive(Clone, Copy, Debug, Default)]
pub struct WorldVocab {
    _priv: (),
}

impl WorldVocab {
    pub fn standard() -> Self {
        WorldVocab { _priv: () }
    }

    pub fn object_count(&self) -> usize {
        OBJECTS.len()
    }

    pub fn attribute_count(&self) -> usize {
        COLORS.len() + SHAPES.len() + TEXTURES.len()
    }

    pub fn spatial_count(&self) -> usize {
        SPATIAL.len()
    }

    pub fn semantic_count(&self) -> usize {
        SEMANTIC.len()
    }

    pub fn max_count(&self) -> u8 {
        COUNT_WORDS.len() as u8
    }

    pub fn object_name(&self, id: ObjectId) -> &'static str {
        OBJECTS[id.index()].singular
    }

    pub fn object_plural(&self, id: ObjectId) -> &'static str {
        OBJECTS[id.index()].plural
    }

    pub fn attribute_name(&self, id: AttributeId) -> &'static str {
        let i = id.index();
        if i < COLORS.len() {
            COLORS[i]
        } else if i < COLORS.len() + SHAPES.len() {
            SHAPES[i - COLORS.len()]
        } else {
            TEXTURES[i - COLORS.len() - SHAPES.len()]
        }
    }

    pub fn attribute_group(&self, id: AttributeId) -> AttributeGroup {
        let i = id.index();
        if i < COLORS.len() {
            AttributeGroup::Color
        } else if i < COLORS.len() + SHAPES.len() {
            AttributeGroup::Shape
        } else {
            AttributeGroup::Texture
        }
    }

    pub fn spatial_phrase(&self, id: SpatialRelId) -> &'static str {
        SPATIAL[id.index()]
    }

    pub fn semantic_gerund(&self, id: SemanticRelId) -> &'static str {
        SEMANTIC[id.index()]
    }

    /// Number word for a count in 1..=9.
    pub fn count_word(&self, count: u8) -> &'static str {
        COUNT_WORDS[count as usize - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes_are_locked() {
        let v = WorldVocab::standard();
        assert_eq!(v.object_count(), 21);
        assert_eq!(v.attribute_count(), 17);
        assert_eq!(v.spatial_count(), 6);
        assert_eq!(v.semantic_count(), 8);
        assert_eq!(v.max_count(), 9);
    }

    #[test]
    fn attribute_groups_partition_the_table() {
        let v = WorldVocab::standard();
        let groups: Vec<_> = (0..v.attribute_count())
            .map(|i| v.attribute_group(AttributeId(i as u16)))
            .collect();
        assert_eq!(
            groups.iter().filter(|&&g| g == AttributeGroup::Color).count(),
            7
        );
        assert_eq!(
            groups.iter().filter(|&&g| g == AttributeGroup::Shape).count(),
            5
        );
        assert_eq!(
            groups
                .iter()
                .filter(|&&g| g == AttributeGroup::Texture)
                .count(),
            5
        );
    }

    #[test]
    fn names_are_distinct() {
        let v = WorldVocab::standard();
        let mut names: Vec<&str> = (0..v.object_count())
            .map(|i| v.object_name(ObjectId(i as u16)))
            .collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), v.object_count());
        let mut attrs: Vec<&str> = (0..v.attribute_count())
            .map(|i| v.attribute_name(AttributeId(i as u16)))
            .collect();
        attrs.sort_unstable();
        attrs.dedup();
        assert_eq!(attrs.len(), v.attribute_count());
    }

    #[test]
    fn count_words_cover_the_count_range() {
        let v = WorldVocab::standard();
        assert_eq!(v.count_word(1), "one");
        assert_eq!(v.count_word(9), "nine");
    }
}
