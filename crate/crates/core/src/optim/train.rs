use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bridge::{joint_objective, pack, unpack, JointDims, JointParams};
use crate::error::{Error, Result};
use crate::fa::{fa_marginal_nll, fa_marginal_nll_grad, Dataset, FaParams};
use crate::kg::{sample_negative_set, KnowledgeGraph, Triple};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::adam::{AdamConfig, AdamState};
use super::early_stopping::{EarlyStopping, Verdict};

/// Floor applied to initial per-attribute variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Model and optimizer knobs for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d_x: usize,
    pub d_e: usize,
    pub adam: AdamConfig,
    pub patience: usize,
    pub max_epochs: usize,
    pub negatives_per_positive: usize,
    /// Draw a fresh negative set every epoch instead of once per run.
    pub resample_negatives: bool,
    /// Objects per mini-batch; `None` is full-batch.
    pub batch_size: Option<usize>,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_x: 5,
            d_e: 5,
            adam: AdamConfig::default(),
            patience: 50,
            max_epochs: 5000,
            negatives_per_positive: 2,
            resample_negatives: false,
            batch_size: None,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.d_x == 0 || self.d_e == 0 {
            return bad("d_x and d_e must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.negatives_per_positive == 0 {
            return bad("negatives_per_positive must be at least 1");
        }
        if self.init_scale.is_nan() || self.init_scale <= 0.0 {
            return bad("init_scale must be positive");
        }
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Joint objective at the start of the epoch (averaged over batches).
    pub train_objective: f64,
    pub val_fa_nll: f64,
}

/// Renders `epoch,train_objective,val_fa_nll` CSV.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_objective,val_fa_nll\n");
    for r in history {
        out.push_str(&format!("{},{:?},{:?}\n", r.epoch, r.train_objective, r.val_fa_nll));
    }
    out
}

fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, scale: f64) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z * scale)
}

fn random_matrix<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| normal(rng, scale))
}

fn moment_init<T: Scalar>(train: &Dataset<T>) -> (Vec<T>, Vec<T>) {
    let floor = T::lit(VARIANCE_FLOOR);
    let log_var = train
        .column_variances()
        .into_iter()
        .map(|v| v.max(floor).ln())
        .collect();
    (train.column_means(), log_var)
}

/// Random start: loadings, embeddings, relation vectors and `A` are iid
/// `N(0, init_scale²)` (drawn in that order), `b = 0`, `μ` and `log σ²`
/// from the training moments.
pub fn init_params<T: Scalar, R: Rng + ?Sized>(
    dims: &JointDims,
    init_scale: f64,
    train: &Dataset<T>,
    rng: &mut R,
) -> Result<JointParams<T>> {
    if init_scale.is_nan() || init_scale <= 0.0 {
        return Err(Error::Config("init_scale must be positive".into()));
    }
    if train.n_objects() == 0 {
        return Err(Error::Config("empty training data".into()));
    }
    if train.n_attributes() != dims.m {
        return Err(Error::Dimension {
            context: "training data width",
            expected: dims.m,
            actual: train.n_attributes(),
        });
    }
    let mut p = JointParams::zeros(dims);
    p.free_loadings = random_matrix(dims.n_free(), dims.d_x, init_scale, rng);
    p.embeddings = random_matrix(dims.n_entities, dims.d_e, init_scale, rng);
    p.relations = random_matrix(dims.n_relations, dims.d_e, init_scale, rng);
    p.affine.a = random_matrix(dims.d_x, dims.d_e, init_scale, rng);
    (p.mu, p.log_var) = moment_init(train);
    Ok(p)
}

/// What a finished optimization run hands back.
#[derive(Debug, Clone)]
pub struct LoopOutcome<T> {
    /// Packed parameters at the best validation epoch.
    pub best: Vec<T>,
    pub best_epoch: usize,
    pub best_val: T,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
}

/// Epoch loop with patience-based early stopping.
///
/// `epoch_step` runs one epoch of updates in place and returns the training
/// objective; `validate` scores the post-epoch parameters. The returned
/// snapshot is the argmin of the validation loss, never the last iterate.
pub fn run_epochs<T, S, V>(
    init: Vec<T>,
    patience: usize,
    max_epochs: usize,
    mut epoch_step: S,
    mut validate: V,
) -> Result<LoopOutcome<T>>
where
    T: Scalar,
    S: FnMut(usize, &mut Vec<T>) -> Result<T>,
    V: FnMut(&[T]) -> Result<T>,
{
    if patience == 0 || max_epochs == 0 {
        return Err(Error::Config("patience and max_epochs must be at least 1".into()));
    }
    let mut params = init;
    let mut stopper = EarlyStopping::new(patience);
    let mut history = Vec::new();
    let mut best = params.clone();
    let abort = |epoch: usize, err: Error, history: &Vec<EpochRecord>| Error::TrainingAborted {
        epoch,
        message: err.to_string(),
        history: history.clone(),
    };

    let mut epoch = 0;
    while epoch < max_epochs {
        epoch += 1;
        let train_objective = epoch_step(epoch, &mut params).map_err(|e| abort(epoch, e, &history))?;
        let val = validate(&params).map_err(|e| abort(epoch, e, &history))?;
        if !val.is_finite() {
            return Err(abort(
                epoch,
                Error::Numerical("non-finite validation loss".into()),
                &history,
            ));
        }
        history.push(EpochRecord {
            epoch,
            train_objective: train_objective.as_f64(),
            val_fa_nll: val.as_f64(),
        });
        match stopper.observe(epoch, val) {
            Verdict::Improved => best.clone_from(&params),
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    let (best_epoch, best_val) = stopper.best().expect("at least one epoch ran");
    Ok(LoopOutcome {
        best,
        best_epoch,
        best_val,
        epochs_run: epoch,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: JointParams<T>,
    pub best_val_nll: T,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
}

/// Splits `items` into `parts` contiguous chunks of near-equal size.
fn chunk_bounds(len: usize, parts: usize, k: usize) -> (usize, usize) {
    (len * k / parts, len * (k + 1) / parts)
}

/// Joint training by Adam ascent with early stopping on validation FA NLL.
///
/// `kg` provides the tying and is the reference for negative collisions;
/// `positives` is the (possibly subsampled) tuple list actually fitted and
/// `negatives` its initial negative set. `rng` drives initialization and,
/// when configured, per-epoch resampling and mini-batch shuffling.
#[allow(clippy::too_many_arguments)]
pub fn train<T: Scalar, R: Rng + ?Sized>(
    config: &TrainConfig,
    train: &Dataset<T>,
    val: &Dataset<T>,
    kg: &KnowledgeGraph,
    positives: &[Triple],
    negatives: &[Triple],
    rng: &mut R,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let dims = JointDims::for_graph(kg, train.n_attributes(), config.d_x, config.d_e);
    let init = init_params(&dims, config.init_scale, train, rng)?;
    train_from(config, init, train, val, kg, positives, negatives, rng)
}

/// [`train`] from explicit starting parameters.
#[allow(clippy::too_many_arguments)]
pub fn train_from<T: Scalar, R: Rng + ?Sized>(
    config: &TrainConfig,
    init: JointParams<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    kg: &KnowledgeGraph,
    positives: &[Triple],
    negatives: &[Triple],
    rng: &mut R,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let dims = init.dims();
    let mut adam = AdamState::new(dims.packed_len(), config.adam);
    let mut negatives = negatives.to_vec();
    let mut order: Vec<usize> = (0..train.n_objects()).collect();
    let mut pos_order = positives.to_vec();

    let epoch_step = |_epoch: usize, flat: &mut Vec<T>| -> Result<T> {
        if config.resample_negatives && !positives.is_empty() {
            negatives = sample_negative_set(positives, kg, config.negatives_per_positive, rng)?;
        }
        let Some(batch) = config.batch_size.filter(|&b| b < train.n_objects()) else {
            let joint = unpack(flat, &dims)?;
            let (value, grad) = joint_objective(&joint, train, positives, &negatives, kg)?;
            adam.step(flat, &pack(&grad))?;
            return Ok(value);
        };
        order.shuffle(rng);
        pos_order.shuffle(rng);
        negatives.shuffle(rng);
        let parts = train.n_objects().div_ceil(batch);
        let mut total = T::zero();
        for k in 0..parts {
            let (lo, hi) = chunk_bounds(order.len(), parts, k);
            let data = train.select_rows(&order[lo..hi]);
            let (plo, phi) = chunk_bounds(pos_order.len(), parts, k);
            let (nlo, nhi) = chunk_bounds(negatives.len(), parts, k);
            let joint = unpack(flat, &dims)?;
            let (value, grad) = joint_objective(&joint, &data, &pos_order[plo..phi], &negatives[nlo..nhi], kg)?;
            adam.step(flat, &pack(&grad))?;
            total += value;
        }
        Ok(total / T::from_usize(parts).unwrap())
    };
    let validate = |flat: &[T]| -> Result<T> {
        let joint = unpack(flat, &dims)?;
        fa_marginal_nll(val, &joint.fa_params(kg)?)
    };

    let out = run_epochs(pack(&init), config.patience, config.max_epochs, epoch_step, validate)?;
    Ok(TrainOutcome {
        params: unpack(&out.best, &dims)?,
        best_val_nll: out.best_val,
        best_epoch: out.best_epoch,
        epochs_run: out.epochs_run,
        history: out.history,
    })
}

#[derive(Debug, Clone)]
pub struct FaTrainOutcome<T> {
    pub params: FaParams<T>,
    pub best_val_nll: T,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
}

/// Plain maximum-likelihood factor analysis (no graph), full batch.
///
/// Draws the loading matrix exactly as [`init_params`] draws untied rows.
pub fn train_plain_fa<T: Scalar, R: Rng + ?Sized>(
    config: &TrainConfig,
    train: &Dataset<T>,
    val: &Dataset<T>,
    rng: &mut R,
) -> Result<FaTrainOutcome<T>> {
    config.validate()?;
    let m = train.n_attributes();
    let d_x = config.d_x;
    let loadings = random_matrix::<T, _>(m, d_x, config.init_scale, rng);
    let (mu, log_var) = moment_init(train);

    let to_params = |flat: &[T]| FaParams {
        mu: flat[..m].to_vec(),
        log_var: flat[m..2 * m].to_vec(),
        loadings: Matrix::from_vec(m, d_x, flat[2 * m..].to_vec()).expect("packed FA length"),
    };
    let mut init = mu;
    init.extend(log_var);
    init.extend_from_slice(loadings.as_slice());
    let mut adam = AdamState::new(init.len(), config.adam);

    let epoch_step = |_epoch: usize, flat: &mut Vec<T>| -> Result<T> {
        let (nll, g) = fa_marginal_nll_grad(train, &to_params(flat))?;
        let ascent: Vec<T> =
            g.mu.iter()
                .chain(&g.log_var)
                .chain(g.loadings.as_slice())
                .map(|&d| -d)
                .collect();
        adam.step(flat, &ascent)?;
        Ok(-nll)
    };
    let validate = |flat: &[T]| fa_marginal_nll(val, &to_params(flat));
    let out = run_epochs(init, config.patience, config.max_epochs, epoch_step, validate)?;
    Ok(FaTrainOutcome {
        params: to_params(&out.best),
        best_val_nll: out.best_val,
        best_epoch: out.best_epoch,
        epochs_run: out.epochs_run,
        history: out.history,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toy_data() -> Dataset<f64> {
        let rows = vec![
            vec![1.0, 2.0, 3.0],
            vec![1.0, 0.5, -1.0],
            vec![1.0, 1.5, 0.0],
            vec![1.0, -0.5, 2.0],
        ];
        Dataset::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn init_uses_moments_and_floors_variance() {
        let data = toy_data();
        let dims = JointDims {
            n_entities: 2,
            n_relations: 1,
            d_e: 2,
            d_x: 2,
            m: 3,
            m_tied: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = init_params(&dims, 0.1, &data, &mut rng).unwrap();
        assert_eq!(p.mu[0], 1.0);
        assert_eq!(p.log_var[0], (1e-6f64).ln());
        assert_eq!(p.affine.b, vec![0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = init_params(&dims, 0.1, &data, &mut rng).unwrap();
        assert_eq!(pack(&p), pack(&q));
        assert!(init_params(&dims, 0.0, &data, &mut rng).is_err());
    }

    #[test]
    fn strictly_improving_runs_to_cap() {
        let mut calls = 0;
        let out = run_epochs(
            vec![0.0f64],
            50,
            20,
            |_, p| {
                p[0] += 1.0;
                Ok(0.0)
            },
            |p| {
                calls += 1;
                Ok(-p[0])
            },
        )
        .unwrap();
        assert_eq!(calls, 20);
        assert_eq!(out.epochs_run, 20);
        assert_eq!(out.best_epoch, 20);
        assert_eq!(out.best, vec![20.0]);
    }

    #[test]
    fn constant_validation_returns_first_epoch() {
        let out = run_epochs(
            vec![0.0f64],
            50,
            5000,
            |_, p| {
                p[0] += 1.0;
                Ok(0.0)
            },
            |_| Ok(1.0),
        )
        .unwrap();
        assert_eq!(out.epochs_run, 51);
        assert_eq!(out.best_epoch, 1);
        assert_eq!(out.best, vec![1.0]);
    }

    #[test]
    fn failure_keeps_partial_history() {
        let err = run_epochs(
            vec![0.0f64],
            5,
            100,
            |e, _| {
                if e == 4 {
                    Err(Error::Numerical("boom".into()))
                } else {
                    Ok(0.0)
                }
            },
            |_| Ok(1.0),
        )
        .unwrap_err();
        match err {
            Error::TrainingAborted { epoch, history, .. } => {
                assert_eq!(epoch, 4);
                assert_eq!(history.len(), 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn history_csv_format() {
        let h = [EpochRecord {
            epoch: 1,
            train_objective: -2.5,
            val_fa_nll: 3.0,
        }];
        assert_eq!(history_csv(&h), "epoch,train_objective,val_fa_nll\n1,-2.5,3.0\n");
    }

    #[test]
    fn minibatch_training_runs() {
        let data = toy_data();
        let kg = KnowledgeGraph::new(vec![], vec![], vec![], Default::default()).unwrap();
        let cfg = TrainConfig {
            d_x: 1,
            d_e: 1,
            max_epochs: 20,
            batch_size: Some(2),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = train(&cfg, &data, &data, &kg, &[], &[], &mut rng).unwrap();
        assert!(out.epochs_run <= 20);
        assert!(out.best_val_nll.is_finite());
    }
}
