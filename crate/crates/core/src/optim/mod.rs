//! Adam ascent on the joint objective with validation early stopping.

mod adam;
mod early_stopping;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use early_stopping::{EarlyStopping, Verdict};
pub use train::{
    history_csv, init_params, run_epochs, train, train_from, train_plain_fa, EpochRecord, FaTrainOutcome, LoopOutcome,
    TrainConfig, TrainOutcome, VARIANCE_FLOOR,
};
