//! Knowledge graph: vocabularies, positive tuples, and the link between
//! dataset attributes and entities.

mod distmult;
mod io;
mod negatives;

use std::collections::{BTreeMap, HashSet};

pub use distmult::{distmult_score, distmult_score_grad, kg_objective, log_sigmoid, tuple_log_likelihood, KgGradient};
pub use io::{load_kg, save_attribute_map, save_triples};
pub use negatives::{sample_negative_set, sample_negatives, MAX_SAMPLING_TRIES};

use crate::error::{Error, Result};

/// `(head, relation, tail)` as vocabulary indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self { head, relation, tail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledTuple {
    pub tuple: Triple,
    pub label: Label,
}

/// Negatives are drawn from the same class as the entity they replace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityClass {
    Attribute,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    relations: Vec<String>,
    positives: Vec<Triple>,
    positive_set: HashSet<Triple>,
    /// attribute column index -> entity index
    attribute_entity: BTreeMap<usize, usize>,
    entity_class: Vec<EntityClass>,
    attribute_pool: Vec<usize>,
    other_pool: Vec<usize>,
}

impl KnowledgeGraph {
    /// Checks index bounds, duplicate tuples and injectivity of the
    /// attribute map. Coverage of attribute entities by tuples is checked
    /// separately by [`KnowledgeGraph::check_attribute_coverage`], since
    /// subsampled graphs may legitimately orphan entities.
    pub fn new(
        entities: Vec<String>,
        relations: Vec<String>,
        positives: Vec<Triple>,
        attribute_entity: BTreeMap<usize, usize>,
    ) -> Result<Self> {
        let n_ent = entities.len();
        let mut positive_set = HashSet::with_capacity(positives.len());
        for t in &positives {
            if t.head >= n_ent || t.tail >= n_ent || t.relation >= relations.len() {
                return Err(Error::Config(format!(
                    "tuple ({}, {}, {}) out of vocabulary bounds",
                    t.head, t.relation, t.tail
                )));
            }
            if !positive_set.insert(*t) {
                return Err(Error::Config(format!(
                    "duplicate positive tuple ({}, {}, {})",
                    entities[t.head], relations[t.relation], entities[t.tail]
                )));
            }
        }
        let mut entity_class = vec![EntityClass::Other; n_ent];
        for (&attr, &ent) in &attribute_entity {
            if ent >= n_ent {
                return Err(Error::Config(format!(
                    "attribute {attr} mapped to out-of-range entity {ent}"
                )));
            }
            if entity_class[ent] == EntityClass::Attribute {
                return Err(Error::Config(format!(
                    "entity `{}` mapped to more than one attribute",
                    entities[ent]
                )));
            }
            entity_class[ent] = EntityClass::Attribute;
        }
        let (attribute_pool, other_pool) = pools(&entity_class);
        Ok(Self {
            entities,
            relations,
            positives,
            positive_set,
            attribute_entity,
            entity_class,
            attribute_pool,
            other_pool,
        })
    }

    /// Every attribute-corresponding entity must occur in some positive tuple.
    pub fn check_attribute_coverage(&self) -> Result<()> {
        let mut seen = vec![false; self.entities.len()];
        for t in &self.positives {
            seen[t.head] = true;
            seen[t.tail] = true;
        }
        for &ent in self.attribute_entity.values() {
            if !seen[ent] {
                return Err(Error::Config(format!(
                    "attribute entity `{}` appears in no positive tuple",
                    self.entities[ent]
                )));
            }
        }
        Ok(())
    }

    /// Same vocabularies and attribute map, different tuple set.
    pub fn with_positives(&self, positives: Vec<Triple>) -> Result<Self> {
        Self::new(
            self.entities.clone(),
            self.relations.clone(),
            positives,
            self.attribute_entity.clone(),
        )
    }

    /// Same vocabularies and tuples with the attribute map cleared.
    pub fn without_attribute_map(&self) -> Self {
        Self::new(
            self.entities.clone(),
            self.relations.clone(),
            self.positives.clone(),
            BTreeMap::new(),
        )
        .expect("dropping the attribute map keeps a valid graph")
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn n_tied(&self) -> usize {
        self.attribute_entity.len()
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn positives(&self) -> &[Triple] {
        &self.positives
    }

    pub fn is_positive(&self, t: &Triple) -> bool {
        self.positive_set.contains(t)
    }

    pub fn attribute_entity(&self) -> &BTreeMap<usize, usize> {
        &self.attribute_entity
    }

    pub fn entity_for_attribute(&self, attr: usize) -> Option<usize> {
        self.attribute_entity.get(&attr).copied()
    }

    pub fn entity_class(&self, entity: usize) -> EntityClass {
        self.entity_class[entity]
    }

    pub fn class_pool(&self, class: EntityClass) -> &[usize] {
        match class {
            EntityClass::Attribute => &self.attribute_pool,
            EntityClass::Other => &self.other_pool,
        }
    }

    pub fn labeled_positives(&self) -> Vec<LabeledTuple> {
        self.positives
            .iter()
            .map(|&tuple| LabeledTuple {
                tuple,
                label: Label::Positive,
            })
            .collect()
    }

    pub(crate) fn describe(&self, t: &Triple) -> (String, String, String) {
        (
            self.entities[t.head].clone(),
            self.relations[t.relation].clone(),
            self.entities[t.tail].clone(),
        )
    }
}

fn pools(classes: &[EntityClass]) -> (Vec<usize>, Vec<usize>) {
    let mut attr = Vec::new();
    let mut other = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        match c {
            EntityClass::Attribute => attr.push(i),
            EntityClass::Other => other.push(i),
        }
    }
    (attr, other)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_duplicates_and_bounds() {
        let e = names(&["a", "b"]);
        let r = names(&["r"]);
        let dup = vec![Triple::new(0, 0, 1), Triple::new(0, 0, 1)];
        assert!(KnowledgeGraph::new(e.clone(), r.clone(), dup, BTreeMap::new()).is_err());
        let oob = vec![Triple::new(0, 1, 1)];
        assert!(KnowledgeGraph::new(e, r, oob, BTreeMap::new()).is_err());
    }

    #[test]
    fn attribute_map_must_be_injective() {
        let e = names(&["a", "b"]);
        let r = names(&["r"]);
        let map = BTreeMap::from([(0, 0), (1, 0)]);
        assert!(KnowledgeGraph::new(e, r, vec![Triple::new(0, 0, 1)], map).is_err());
    }

    #[test]
    fn classes_and_coverage() {
        let e = names(&["a", "b", "c"]);
        let r = names(&["r"]);
        let kg = KnowledgeGraph::new(e, r, vec![Triple::new(0, 0, 2)], BTreeMap::from([(0, 0), (1, 1)])).unwrap();
        assert_eq!(kg.entity_class(0), EntityClass::Attribute);
        assert_eq!(kg.entity_class(2), EntityClass::Other);
        assert_eq!(kg.class_pool(EntityClass::Attribute), &[0, 1]);
        // `b` is tied but appears nowhere
        assert!(kg.check_attribute_coverage().is_err());
        let kg = kg
            .with_positives(vec![Triple::new(0, 0, 2), Triple::new(1, 0, 2)])
            .unwrap();
        kg.check_attribute_coverage().unwrap();
    }
}
