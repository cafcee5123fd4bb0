use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Scenario, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fsutil::read_to_string;
use crate::optim::TrainConfig;

/// Everything a sweep needs, read from TOML.
///
/// ```toml
/// scenario = "random"
/// tuple_proportions = [0.0, 0.5, 1.0]
/// train_fractions = [0.8]
/// n_trials = 10
/// base_seed = 0
/// dataset = "rain.csv"
/// triples = "countries.tsv"
/// attribute_map = "attribute_map.tsv"
///
/// [train]
/// d_x = 5
/// d_e = 5
///
/// [train.adam]
/// learning_rate = 0.01
/// ```
///
/// A `[synthetic]` table may replace the three input paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub tuple_proportions: Vec<f64>,
    pub train_fractions: Vec<f64>,
    pub n_trials: usize,
    /// Trial `k` uses seed `base_seed + k`.
    pub base_seed: u64,
    pub val_fraction: f64,
    pub dataset: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub attribute_map: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub output_dir: Option<PathBuf>,
    /// Also write `history_<cell>_trial<k>.csv` for every trial.
    pub write_histories: bool,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Random,
            tuple_proportions: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            train_fractions: vec![0.8],
            n_trials: 10,
            base_seed: 0,
            val_fraction: 0.2,
            dataset: None,
            triples: None,
            attribute_map: None,
            synthetic: None,
            output_dir: None,
            write_histories: false,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.tuple_proportions.is_empty() || self.train_fractions.is_empty() {
            return Err(Error::Config(
                "tuple_proportions and train_fractions must be non-empty".into(),
            ));
        }
        if let Some(p) = self.tuple_proportions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("tuple proportion {p} outside [0, 1]")));
        }
        if let Some(f) = self.train_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::Config(format!("train fraction {f} outside (0, 1)")));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("val_fraction must lie in (0, 1)".into()));
        }
        if self.synthetic.is_none() && (self.dataset.is_none() || self.triples.is_none()) {
            return Err(Error::Config(
                "either [synthetic] or dataset + triples paths are required".into(),
            ));
        }
        Ok(())
    }

    /// Short hash of the settings that determine results (output location
    /// excluded).
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.write_histories = false;
        let digest = Sha256::digest(c.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
