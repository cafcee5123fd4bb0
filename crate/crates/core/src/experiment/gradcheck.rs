//! Central finite-difference checks of every analytic gradient.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bridge::{block_layout, joint_objective, pack, unpack, JointDims};
use crate::fa::{fa_marginal_nll, fa_marginal_nll_grad, Dataset, FaParams};
use crate::kg::{kg_objective, KnowledgeGraph, Triple};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub instances: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Adds a deliberate error to the named block's analytic gradient.
    pub corrupt_block: Option<String>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            instances: 100,
            seed: 0,
            step: 1e-5,
            tolerance: 1e-5,
            corrupt_block: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub block: String,
    pub max_rel_error: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error < self.tolerance)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            let verdict = if b.max_rel_error < self.tolerance { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<20} max_rel_error {:.3e} over {} instances  {verdict}",
                b.block, b.max_rel_error, b.instances
            )?;
        }
        write!(
            f,
            "tolerance {:.1e}: {}",
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Block-scaled relative error `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, 1e-8)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(1e-8, f64::max);
    diff / scale
}

/// Central differences of `f` at `x`.
pub fn numeric_gradient(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn gauss(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * scale
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| gauss(rng, scale))
}

struct Tracker {
    opts: GradCheckOptions,
    worst: BTreeMap<String, (f64, usize)>,
    order: Vec<String>,
}

impl Tracker {
    fn record(&mut self, block: &str, mut analytic: Vec<f64>, numeric: &[f64]) {
        if self.opts.corrupt_block.as_deref() == Some(block) {
            if let Some(first) = analytic.first_mut() {
                *first += 1e-3 * (1.0 + first.abs());
            }
        }
        let err = relative_error(&analytic, numeric);
        let entry = self.worst.entry(block.to_owned()).or_insert_with(|| {
            self.order.push(block.to_owned());
            (0.0, 0)
        });
        entry.0 = entry.0.max(err);
        entry.1 += 1;
    }
}

fn check_fa(rng: &mut ChaCha8Rng, t: &mut Tracker) {
    let n = rng.random_range(1..=30);
    let m = rng.random_range(1..=8);
    let d_x = rng.random_range(1..=3);
    let data = Dataset::from_matrix(random_matrix(n, m, 1.0, rng)).unwrap();
    let params = FaParams {
        mu: (0..m).map(|_| gauss(rng, 0.5)).collect(),
        log_var: (0..m).map(|_| gauss(rng, 0.3)).collect(),
        loadings: random_matrix(m, d_x, 0.7, rng),
    };
    let (_, g) = fa_marginal_nll_grad(&data, &params).unwrap();
    let step = t.opts.step;

    let num_mu = numeric_gradient(&params.mu, step, |x| {
        fa_marginal_nll(
            &data,
            &FaParams {
                mu: x.to_vec(),
                ..params.clone()
            },
        )
        .unwrap()
    });
    t.record("fa.mu", g.mu, &num_mu);

    let num_w = numeric_gradient(params.loadings.as_slice(), step, |x| {
        let loadings = Matrix::from_vec(m, d_x, x.to_vec()).unwrap();
        fa_marginal_nll(
            &data,
            &FaParams {
                loadings,
                ..params.clone()
            },
        )
        .unwrap()
    });
    t.record("fa.loadings", g.loadings.into_vec(), &num_w);

    let num_lv = numeric_gradient(&params.log_var, step, |x| {
        fa_marginal_nll(
            &data,
            &FaParams {
                log_var: x.to_vec(),
                ..params.clone()
            },
        )
        .unwrap()
    });
    t.record("fa.log_var", g.log_var, &num_lv);
}

fn random_tuples(rng: &mut ChaCha8Rng, count: usize, n_ent: usize, n_rel: usize) -> Vec<Triple> {
    (0..count)
        .map(|_| {
            Triple::new(
                rng.random_range(0..n_ent),
                rng.random_range(0..n_rel),
                rng.random_range(0..n_ent),
            )
        })
        .collect()
}

fn check_kg(rng: &mut ChaCha8Rng, t: &mut Tracker) {
    let n_ent = rng.random_range(2..=8);
    let n_rel = rng.random_range(1..=3);
    let d_e = rng.random_range(1..=4);
    let ents = random_matrix(n_ent, d_e, 1.0, rng);
    let rels = random_matrix(n_rel, d_e, 1.0, rng);
    let n_pos = rng.random_range(1..=6);
    let pos = random_tuples(rng, n_pos, n_ent, n_rel);
    let n_neg = rng.random_range(0..=12);
    let neg = random_tuples(rng, n_neg, n_ent, n_rel);
    let (_, g) = kg_objective(&ents, &rels, &pos, &neg);
    let step = t.opts.step;

    let num_e = numeric_gradient(ents.as_slice(), step, |x| {
        let e = Matrix::from_vec(n_ent, d_e, x.to_vec()).unwrap();
        kg_objective(&e, &rels, &pos, &neg).0
    });
    t.record("kg.entities", g.entities.into_vec(), &num_e);

    let num_r = numeric_gradient(rels.as_slice(), step, |x| {
        let r = Matrix::from_vec(n_rel, d_e, x.to_vec()).unwrap();
        kg_objective(&ents, &r, &pos, &neg).0
    });
    t.record("kg.relations", g.relations.into_vec(), &num_r);
}

/// E = 6, m = 5, m′ = 3, n = 12, d_x = d_e = 2.
fn check_joint(rng: &mut ChaCha8Rng, t: &mut Tracker) {
    let (n_ent, n_rel, m, n, d) = (6, 2, 5, 12, 2);
    let names: Vec<String> = (0..n_ent).map(|i| format!("e{i}")).collect();
    let rel_names = vec!["r0".to_owned(), "r1".to_owned()];
    // attributes 0..3 tied to a random choice of distinct entities
    let mut ents: Vec<usize> = (0..n_ent).collect();
    rand::seq::SliceRandom::shuffle(ents.as_mut_slice(), rng);
    let map: BTreeMap<usize, usize> = (0..3).map(|i| (i, ents[i])).collect();
    let mut positives = random_tuples(rng, 8, n_ent, n_rel);
    positives.sort_unstable();
    positives.dedup();
    let kg = KnowledgeGraph::new(names, rel_names, positives, map).unwrap();
    let neg = random_tuples(rng, 10, n_ent, n_rel);
    let data = Dataset::from_matrix(random_matrix(n, m, 1.0, rng)).unwrap();

    let dims = JointDims::for_graph(&kg, m, d, d);
    let mut x: Vec<f64> = (0..dims.packed_len()).map(|_| gauss(rng, 0.6)).collect();
    // keep log-variances moderate
    let lv_start = dims.packed_len() - dims.n_free() * d - m;
    for v in &mut x[lv_start..lv_start + m] {
        *v *= 0.5;
    }
    let joint = unpack(&x, &dims).unwrap();
    let (_, grad) = joint_objective(&joint, &data, kg.positives(), &neg, &kg).unwrap();
    let analytic = pack(&grad);
    let numeric = numeric_gradient(&x, t.opts.step, |p| {
        joint_objective(&unpack(p, &dims).unwrap(), &data, kg.positives(), &neg, &kg)
            .unwrap()
            .0
    });
    let mut offset = 0;
    for (name, len) in block_layout(&dims) {
        let range = offset..offset + len;
        t.record(
            &format!("joint.{name}"),
            analytic[range.clone()].to_vec(),
            &numeric[range],
        );
        offset += len;
    }
}

/// Runs the FA, KG and joint suites on `instances` random problems each.
pub fn grad_check(opts: &GradCheckOptions) -> GradCheckReport {
    let mut tracker = Tracker {
        opts: opts.clone(),
        worst: BTreeMap::new(),
        order: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.instances {
        check_fa(&mut rng, &mut tracker);
    }
    for _ in 0..opts.instances {
        check_kg(&mut rng, &mut tracker);
    }
    for _ in 0..opts.instances {
        check_joint(&mut rng, &mut tracker);
    }
    let blocks = tracker
        .order
        .iter()
        .map(|name| {
            let (max_rel_error, instances) = tracker.worst[name];
            BlockReport {
                block: name.clone(),
                max_rel_error,
                instances,
            }
        })
        .collect();
    GradCheckReport {
        blocks,
        tolerance: opts.tolerance,
    }
}
