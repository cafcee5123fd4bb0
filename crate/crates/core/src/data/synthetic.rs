//! Synthetic factor-analysis data with a knowledge graph that carries
//! information about the tied loading rows.
//!
//! Extra ("region") entities act as cluster anchors. Each attribute entity
//! sits near one anchor, so attributes sharing an anchor get similar
//! embeddings and hence similar loading rows. Positive tuples link attribute
//! entities to anchors: the highest-scoring DistMult candidates of each
//! attribute entity under the ground truth, kept only above a score margin.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bridge::{AffineMap, JointParams};
use crate::error::{Error, Result};
use crate::fa::Dataset;
use crate::kg::{distmult_score, KnowledgeGraph, Triple};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_objects: usize,
    pub m_attributes: usize,
    /// The first `m_tied` attributes get entities.
    pub m_tied: usize,
    pub d_x: usize,
    pub d_e: usize,
    /// Anchor entities that correspond to no attribute.
    pub n_extra_entities: usize,
    pub n_relations: usize,
    pub tuples_per_entity: usize,
    pub noise_std: f64,
    pub ground_truth_seed: u64,
    /// Minimum ground-truth DistMult score of a positive tuple.
    pub score_margin: f64,
    /// Spread of attribute embeddings around their anchor.
    pub cluster_spread: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_objects: 500,
            m_attributes: 40,
            m_tied: 30,
            d_x: 3,
            d_e: 3,
            n_extra_entities: 6,
            n_relations: 2,
            tuples_per_entity: 8,
            noise_std: 1.5,
            ground_truth_seed: 0,
            score_margin: 1.0,
            cluster_spread: 0.1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.n_objects == 0 || self.m_attributes == 0 || self.d_x == 0 || self.d_e == 0 {
            return bad("counts must be positive");
        }
        if self.m_tied > self.m_attributes {
            return bad("m_tied exceeds m_attributes");
        }
        if self.m_tied > 0 && (self.n_extra_entities == 0 || self.n_relations == 0 || self.tuples_per_entity == 0) {
            return bad("tied attributes need anchors, relations and tuples");
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 || self.cluster_spread.is_nan() || self.cluster_spread < 0.0
        {
            return bad("noise_std and cluster_spread must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance<T> {
    pub dataset: Dataset<T>,
    pub kg: KnowledgeGraph,
    /// Ground truth laid out for `kg` (entities in vocabulary order).
    pub truth: JointParams<T>,
    /// Index of the anchor each tied attribute was drawn around.
    pub attribute_anchor: Vec<usize>,
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn intern(map: &mut HashMap<usize, usize>, order: &mut Vec<usize>, raw_id: usize) -> usize {
    *map.entry(raw_id).or_insert_with(|| {
        order.push(raw_id);
        order.len() - 1
    })
}

pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<SyntheticInstance<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.ground_truth_seed);
    let d_e = spec.d_e;
    let n_anchor = if spec.m_tied > 0 { spec.n_extra_entities } else { 0 };

    // raw entity layout: attribute entities 0..m_tied, then anchors
    let anchors: Vec<Vec<f64>> = (0..n_anchor)
        .map(|_| (0..d_e).map(|_| 1.5 * gauss(&mut rng)).collect())
        .collect();
    let relations: Vec<Vec<f64>> = (0..spec.n_relations)
        .map(|_| (0..d_e).map(|_| rng.random_range(0.5..1.5)).collect())
        .collect();
    let attribute_anchor: Vec<usize> = (0..spec.m_tied).map(|i| i % n_anchor.max(1)).collect();
    let mut raw: Vec<Vec<f64>> = attribute_anchor
        .iter()
        .map(|&k| {
            anchors[k]
                .iter()
                .map(|c| c + spec.cluster_spread * gauss(&mut rng))
                .collect()
        })
        .collect();
    raw.extend(anchors.iter().cloned());

    let candidates = |raw: &[Vec<f64>], h: usize| -> Vec<(f64, usize, usize)> {
        let mut c = Vec::new();
        for (r, m_r) in relations.iter().enumerate() {
            for (t, e_t) in raw.iter().enumerate().skip(spec.m_tied) {
                let s = distmult_score(&raw[h], e_t, m_r);
                if s > spec.score_margin {
                    c.push((s, r, t));
                }
            }
        }
        c
    };
    // attribute entities with no admissible tuple are redrawn around their anchor
    for h in 0..spec.m_tied {
        let mut tries = 0;
        while candidates(&raw, h).is_empty() {
            tries += 1;
            if tries > MAX_REDRAWS {
                return Err(Error::Generation(format!(
                    "attribute entity {h} has no tuple above margin {} after {MAX_REDRAWS} redraws",
                    spec.score_margin
                )));
            }
            let k = attribute_anchor[h];
            raw[h] = anchors[k]
                .iter()
                .map(|c| c + spec.cluster_spread * gauss(&mut rng))
                .collect();
        }
    }
    let mut raw_tuples = Vec::new();
    for h in 0..spec.m_tied {
        let mut c = candidates(&raw, h);
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        raw_tuples.extend(c.into_iter().take(spec.tuples_per_entity).map(|(_, r, t)| (h, r, t)));
    }

    // vocabularies in first-appearance order so that saving and reloading is stable
    let (mut ent_map, mut order) = (HashMap::new(), Vec::new());
    let (mut rel_map, mut rel_order) = (HashMap::new(), Vec::new());
    let positives: Vec<Triple> = raw_tuples
        .iter()
        .map(|&(h, r, t)| {
            let h2 = intern(&mut ent_map, &mut order, h);
            let r2 = intern(&mut rel_map, &mut rel_order, r);
            Triple::new(h2, r2, intern(&mut ent_map, &mut order, t))
        })
        .collect();
    let entity_names: Vec<String> = order
        .iter()
        .map(|&raw_id| {
            if raw_id < spec.m_tied {
                format!("site{raw_id}")
            } else {
                format!("region{}", raw_id - spec.m_tied)
            }
        })
        .collect();
    let relation_names: Vec<String> = rel_order.iter().map(|r| format!("rel{r}")).collect();
    let attribute_entity: BTreeMap<usize, usize> = (0..spec.m_tied).map(|i| (i, ent_map[&i])).collect();
    let kg = KnowledgeGraph::new(entity_names, relation_names, positives, attribute_entity)?;
    kg.check_attribute_coverage()?;

    // ground-truth parameters
    let d_x = spec.d_x;
    let scale_a = 1.0 / (d_e as f64).sqrt();
    let a = Matrix::from_fn(d_x, d_e, |_, _| T::lit(scale_a * gauss(&mut rng)));
    let b: Vec<T> = (0..d_x).map(|_| T::lit(0.1 * gauss(&mut rng))).collect();
    let affine = AffineMap { a, b };
    let embeddings = Matrix::from_fn(order.len(), d_e, |i, k| T::lit(raw[order[i]][k]));
    let relation_table = Matrix::from_fn(rel_order.len(), d_e, |r, k| T::lit(relations[rel_order[r]][k]));
    let n_free = spec.m_attributes - spec.m_tied;
    let free_loadings = Matrix::from_fn(n_free, d_x, |_, _| T::lit(gauss(&mut rng)));
    let mu: Vec<T> = (0..spec.m_attributes).map(|_| T::lit(gauss(&mut rng))).collect();
    let var = (spec.noise_std * spec.noise_std).max(1e-12);
    let truth = JointParams {
        embeddings,
        relations: relation_table,
        affine,
        mu,
        log_var: vec![T::lit(var.ln()); spec.m_attributes],
        free_loadings,
    };

    let w = truth.fa_params(&kg)?.loadings;
    let noise = T::lit(spec.noise_std);
    let mut values = Matrix::zeros(spec.n_objects, spec.m_attributes);
    for j in 0..spec.n_objects {
        let x: Vec<T> = (0..d_x).map(|_| T::lit(gauss(&mut rng))).collect();
        let wx = w.matvec(&x);
        for i in 0..spec.m_attributes {
            values[(j, i)] = wx[i] + truth.mu[i] + noise * T::lit(gauss(&mut rng));
        }
    }
    let names = (0..spec.m_attributes).map(|i| format!("y{i}")).collect();
    let ids = (0..spec.n_objects).map(|j| format!("obj{j}")).collect();
    let dataset = Dataset::new(values, names, ids)?;

    Ok(SyntheticInstance {
        dataset,
        kg,
        truth,
        attribute_anchor,
    })
}
