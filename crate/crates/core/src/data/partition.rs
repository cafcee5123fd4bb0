use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fa::Dataset;
use crate::kg::KnowledgeGraph;
use crate::scalar::Scalar;

use super::{snapped_ceil, snapped_floor, stream_rng, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Objects are permuted before the test suffix is cut off.
    Random,
    /// The test set is the contiguous suffix in original order.
    Shift,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Random => "random",
            Scenario::Shift => "shift",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Scenario::Random),
            "shift" => Ok(Scenario::Shift),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub scenario: Scenario,
    /// Share of objects used for training plus validation.
    pub train_val_fraction: f64,
    /// Share of the training/validation block held out for validation.
    pub val_fraction_within: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn new(scenario: Scenario, train_val_fraction: f64, seed: u64) -> Self {
        Self {
            scenario,
            train_val_fraction,
            val_fraction_within: 0.2,
            seed,
        }
    }
}

/// Object indices of each split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split sizes: `⌈f·n⌉` objects go to training+validation, of which
/// `round(v·n_tv)` are validation; the rest is test.
pub fn partition_indices(n: usize, spec: &PartitionSpec) -> Result<Partition> {
    let f = spec.train_val_fraction;
    let v = spec.val_fraction_within;
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Config(format!("train_val_fraction {f} outside (0, 1]")));
    }
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Config(format!("val_fraction_within {v} outside (0, 1)")));
    }
    let n_tv = snapped_ceil(f * n as f64).min(n);
    let n_val = snapped_floor(v * n_tv as f64 + 0.5);
    let n_train = n_tv.saturating_sub(n_val);
    if n_train == 0 || n_val == 0 || n_tv == n {
        return Err(Error::Config(format!(
            "partition of {n} objects (fraction {f}) leaves an empty split: train {n_train}, val {n_val}, test {}",
            n - n_tv
        )));
    }

    let mut rng = stream_rng(spec.seed, RngStream::Partition);
    let mut order: Vec<usize> = (0..n).collect();
    if spec.scenario == Scenario::Random {
        order.shuffle(&mut rng);
    }
    let test = order.split_off(n_tv);
    let mut tv = order;
    tv.shuffle(&mut rng);
    let mut train = tv.split_off(n_val);
    let mut val = tv;
    if spec.scenario == Scenario::Shift {
        train.sort_unstable();
        val.sort_unstable();
    }
    Ok(Partition { train, val, test })
}

pub fn partition<T: Scalar>(data: &Dataset<T>, spec: &PartitionSpec) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    let p = partition_indices(data.n_objects(), spec)?;
    Ok((
        data.select_rows(&p.train),
        data.select_rows(&p.val),
        data.select_rows(&p.test),
    ))
}

/// Keeps a uniformly random `⌊p·ℓ⌋` of the positive tuples, in their
/// original order. Vocabularies and the attribute map are untouched.
pub fn subsample_tuples<R: Rng + ?Sized>(kg: &KnowledgeGraph, proportion: f64, rng: &mut R) -> Result<KnowledgeGraph> {
    if !(0.0..=1.0).contains(&proportion) {
        return Err(Error::Config(format!("tuple proportion {proportion} outside [0, 1]")));
    }
    let total = kg.positives().len();
    let keep = snapped_floor(proportion * total as f64).min(total);
    if keep == total {
        return Ok(kg.clone());
    }
    let mut idx = index::sample(rng, total, keep).into_vec();
    idx.sort_unstable();
    kg.with_positives(idx.into_iter().map(|i| kg.positives()[i]).collect())
}
