use rand::Rng;

use crate::error::{Error, Result};

use super::{KnowledgeGraph, Label, LabeledTuple, Triple};

/// Attempts per negative before giving up on a tuple.
pub const MAX_SAMPLING_TRIES: usize = 100;

/// Draws `k` corruptions of `positive`.
///
/// Each draw replaces the head or the tail (equal odds) with a different
/// entity of the same class. Draws that land on a known positive are
/// redrawn, so the accepted output is uniform over the valid corruptions.
/// Relations are never corrupted.
pub fn sample_negatives<R: Rng + ?Sized>(
    positive: &Triple,
    kg: &KnowledgeGraph,
    k: usize,
    rng: &mut R,
) -> Result<Vec<LabeledTuple>> {
    let exhausted = || {
        let (head, relation, tail) = kg.describe(positive);
        Error::SamplingExhausted {
            head,
            relation,
            tail,
            tries: MAX_SAMPLING_TRIES,
        }
    };
    let head_pool = kg.class_pool(kg.entity_class(positive.head));
    let tail_pool = kg.class_pool(kg.entity_class(positive.tail));
    if head_pool.len() < 2 && tail_pool.len() < 2 {
        return Err(exhausted());
    }

    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut accepted = None;
        for _ in 0..MAX_SAMPLING_TRIES {
            let corrupt_head = rng.random_bool(0.5);
            let (pool, replaced) = if corrupt_head {
                (head_pool, positive.head)
            } else {
                (tail_pool, positive.tail)
            };
            if pool.len() < 2 {
                continue;
            }
            let entity = draw_other(pool, replaced, rng);
            let candidate = if corrupt_head {
                Triple {
                    head: entity,
                    ..*positive
                }
            } else {
                Triple {
                    tail: entity,
                    ..*positive
                }
            };
            if !kg.is_positive(&candidate) {
                accepted = Some(candidate);
                break;
            }
        }
        let tuple = accepted.ok_or_else(exhausted)?;
        out.push(LabeledTuple {
            tuple,
            label: Label::Negative,
        });
    }
    Ok(out)
}

/// Uniform pick from `pool` excluding `skip` (which must be in `pool`).
fn draw_other<R: Rng + ?Sized>(pool: &[usize], skip: usize, rng: &mut R) -> usize {
    let i = rng.random_range(0..pool.len() - 1);
    let pos = pool.binary_search(&skip).expect("replaced entity belongs to its pool");
    if i >= pos {
        pool[i + 1]
    } else {
        pool[i]
    }
}

/// `k` negatives for every tuple in `positives`, checked against `kg`.
pub fn sample_negative_set<R: Rng + ?Sized>(
    positives: &[Triple],
    kg: &KnowledgeGraph,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Triple>> {
    let mut out = Vec::with_capacity(positives.len() * k);
    for p in positives {
        out.extend(sample_negatives(p, kg, k, rng)?.into_iter().map(|lt| lt.tuple));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn graph(n: usize, positives: Vec<Triple>, map: BTreeMap<usize, usize>) -> KnowledgeGraph {
        let e = (0..n).map(|i| format!("e{i}")).collect();
        KnowledgeGraph::new(e, vec!["r".into()], positives, map).unwrap()
    }

    #[test]
    fn three_entities_only_two_corruptions() {
        let kg = graph(3, vec![Triple::new(0, 0, 1)], BTreeMap::new());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let allowed: HashSet<_> = [
            Triple::new(2, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(1, 0, 1),
            Triple::new(0, 0, 0),
        ]
        .into_iter()
        .collect();
        for _ in 0..200 {
            let neg = sample_negatives(&Triple::new(0, 0, 1), &kg, 1, &mut rng).unwrap();
            assert_eq!(neg.len(), 1);
            assert_eq!(neg[0].label, Label::Negative);
            assert!(allowed.contains(&neg[0].tuple));
        }
    }

    #[test]
    fn respects_entity_classes() {
        // entities 0,1,2 tied to attributes; 3,4,5 other
        let map = BTreeMap::from([(0, 0), (1, 1), (2, 2)]);
        let pos = vec![Triple::new(0, 0, 3), Triple::new(1, 0, 4), Triple::new(2, 0, 5)];
        let kg = graph(6, pos.clone(), map);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in &pos {
            for n in sample_negatives(p, &kg, 50, &mut rng).unwrap() {
                assert!(n.tuple.head < 3 && n.tuple.tail >= 3);
                assert!(!kg.is_positive(&n.tuple));
                let diff = (n.tuple.head != p.head) as usize + (n.tuple.tail != p.tail) as usize;
                assert_eq!(diff, 1);
            }
        }
    }

    #[test]
    fn exhaustion_names_the_tuple() {
        // every corruption of (0,r,1) is itself positive
        let pos = vec![Triple::new(0, 0, 1), Triple::new(1, 0, 1), Triple::new(0, 0, 0)];
        let kg = graph(2, pos, BTreeMap::new());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = sample_negatives(&Triple::new(0, 0, 1), &kg, 1, &mut rng).unwrap_err();
        assert!(err.to_string().contains("(e0, r, e1)"), "{err}");
        let lone = graph(1, vec![Triple::new(0, 0, 0)], BTreeMap::new());
        assert!(sample_negatives(&Triple::new(0, 0, 0), &lone, 1, &mut rng).is_err());
    }

    #[test]
    fn two_per_positive() {
        let pos = vec![Triple::new(0, 0, 1), Triple::new(2, 0, 3)];
        let kg = graph(5, pos.clone(), BTreeMap::new());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let negs = sample_negative_set(&pos, &kg, 2, &mut rng).unwrap();
        assert_eq!(negs.len(), 4);
    }
}
