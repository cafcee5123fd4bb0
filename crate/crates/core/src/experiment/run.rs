use std::path::Path;

use rayon::prelude::*;

use crate::data::{partition, stream_rng, subsample_tuples, PartitionSpec, RngStream, Scenario};
use crate::error::Result;
use crate::fa::{fa_marginal_nll, Dataset};
use crate::fsutil::write_atomic;
use crate::kg::{sample_negative_set, KnowledgeGraph};
use crate::optim::{history_csv, train, EpochRecord, TrainConfig};
use crate::scalar::Scalar;

use super::config::ExperimentConfig;
use super::summary::{emit_summary, format_trials, percent, summary_tables, TrialResult};

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub scenario: Scenario,
    pub tuple_proportion: f64,
    pub train_fraction: f64,
}

/// Detailed output of one trial.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub test_nll: f64,
    pub best_val_nll: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
}

/// Runs a single trial: partition, tuple subsampling, negative sampling,
/// training, and test NLL of the best-validation snapshot.
///
/// Each stage draws from its own stream of `seed`, so trials with the same
/// seed share the partition and initialization across tuple proportions.
pub fn run_trial<T: Scalar>(
    train_config: &TrainConfig,
    val_fraction: f64,
    cell: Cell,
    seed: u64,
    data: &Dataset<T>,
    kg: &KnowledgeGraph,
) -> Result<TrialRun> {
    let spec = PartitionSpec {
        val_fraction_within: val_fraction,
        ..PartitionSpec::new(cell.scenario, cell.train_fraction, seed)
    };
    let (train_set, val_set, test_set) = partition(data, &spec)?;
    let sub = subsample_tuples(kg, cell.tuple_proportion, &mut stream_rng(seed, RngStream::Subsample))?;
    let negatives = sample_negative_set(
        sub.positives(),
        kg,
        train_config.negatives_per_positive,
        &mut stream_rng(seed, RngStream::Negatives),
    )?;
    let outcome = train(
        train_config,
        &train_set,
        &val_set,
        kg,
        sub.positives(),
        &negatives,
        &mut stream_rng(seed, RngStream::Init),
    )?;
    let test_nll = fa_marginal_nll(&test_set, &outcome.params.fa_params(kg)?)?;
    Ok(TrialRun {
        test_nll: test_nll.as_f64(),
        best_val_nll: outcome.best_val_nll.as_f64(),
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        history: outcome.history,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub results: Vec<TrialResult>,
    pub histories: Vec<(Cell, usize, Vec<EpochRecord>)>,
}

impl ExperimentReport {
    pub fn all_succeeded(&self) -> bool {
        self.results.iter().all(TrialResult::succeeded)
    }
}

/// Runs every (tuple proportion, training fraction, trial) combination.
/// Failed trials are recorded, not propagated.
pub fn run_experiment<T: Scalar>(
    config: &ExperimentConfig,
    data: &Dataset<T>,
    kg: &KnowledgeGraph,
) -> Result<ExperimentReport> {
    config.validate()?;
    let fingerprint = config.fingerprint();
    let mut jobs = Vec::new();
    for &tuple_proportion in &config.tuple_proportions {
        for &train_fraction in &config.train_fractions {
            for trial in 0..config.n_trials {
                let cell = Cell {
                    scenario: config.scenario,
                    tuple_proportion,
                    train_fraction,
                };
                jobs.push((cell, trial));
            }
        }
    }
    let runs: Vec<(Cell, usize, u64, Result<TrialRun>)> = jobs
        .into_par_iter()
        .map(|(cell, trial)| {
            let seed = config.base_seed + trial as u64;
            let run = run_trial(&config.train, config.val_fraction, cell, seed, data, kg);
            (cell, trial, seed, run)
        })
        .collect();

    let mut results = Vec::with_capacity(runs.len());
    let mut histories = Vec::new();
    for (cell, trial, seed, run) in runs {
        let base = TrialResult {
            scenario: cell.scenario,
            tuple_proportion: cell.tuple_proportion,
            train_fraction: cell.train_fraction,
            trial,
            seed,
            test_nll: None,
            best_val_nll: None,
            best_epoch: 0,
            epochs_run: 0,
            fingerprint: fingerprint.clone(),
            error: None,
        };
        match run {
            Ok(r) => {
                results.push(TrialResult {
                    test_nll: Some(r.test_nll),
                    best_val_nll: Some(r.best_val_nll),
                    best_epoch: r.best_epoch,
                    epochs_run: r.epochs_run,
                    ..base
                });
                histories.push((cell, trial, r.history));
            }
            Err(e) => {
                log::error!(
                    "trial {trial} (tuples {}, train {}) failed: {e}",
                    cell.tuple_proportion,
                    cell.train_fraction
                );
                results.push(TrialResult {
                    error: Some(e.to_string()),
                    ..base
                });
            }
        }
    }
    Ok(ExperimentReport { results, histories })
}

pub const TRIALS_FILE: &str = "trials.tsv";

/// Writes the summary tables for `results` into `dir`; returns the paths.
pub fn write_summaries(results: &[TrialResult], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for table in summary_tables(results) {
        let path = dir.join(&table.file_name);
        write_atomic(&path, emit_summary(&table.rows).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// `trials.tsv`, summary tables and (optionally) per-trial histories.
pub fn write_report(report: &ExperimentReport, dir: &Path, with_histories: bool) -> Result<()> {
    write_atomic(&dir.join(TRIALS_FILE), format_trials(&report.results).as_bytes())?;
    write_summaries(&report.results, dir)?;
    if with_histories {
        for (cell, trial, history) in &report.histories {
            let name = format!(
                "history_{}_tuples{}_train{}_trial{trial}.csv",
                cell.scenario,
                percent(cell.tuple_proportion),
                percent(cell.train_fraction)
            );
            write_atomic(&dir.join(name), history_csv(history).as_bytes())?;
        }
    }
    Ok(())
}
