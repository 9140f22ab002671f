//! Experiment orchestration: dataset splits, the training and test stages,
//! reports and replay verification.
//!
//! An experiment writes into its output directory:
//!
//! | file | written by | content |
//! |---|---|---|
//! | `split.json` | every stage | train and test instance ids ([`SplitFile`]) |
//! | `train/iteration-NNN.json` | `train`, after each round | the full [`IterationRecord`](crate::learner::IterationRecord) |
//! | `train/scores.txt` | `train`, after each round | score table, one row per round |
//! | `train/error.txt` | `train`, on abort | the error that stopped training |
//! | `library.json` | `train` | the learned [`ActionLibrary`](crate::learner::ActionLibrary) |
//! | `train_report.json` | `train` | [`TrainReport`] |
//! | `report.json`, `report.txt` | `test` | [`RunReport`] and its table |
//! | `test/episodes.jsonl` | `test` | one episode record per line |
//!
//! Model caches get a `train/` and a `test/` subdirectory so that training
//! prompts can be audited for test-set leakage ([`check_hygiene`]).

mod config;
mod report;
mod run;
mod split;
mod verify;

pub use config::{ConfigOverrides, ExperimentConfig};
pub use report::{
    render_score_table, usage_diff, usage_stats, CandidateSummary, FailureSummary, InstanceOutcome, InstanceSummary,
    IterationSummary, LibraryInfo, RepetitionReport, RequestCounts, RunReport, TrainReport, UsageStats,
    REPORT_SCHEMA_VERSION,
};
pub use run::{run_split, run_test, run_train, Experiment, TestArtifacts, TrainArtifacts};
pub use split::{split_dataset, SplitFile};
pub use verify::{check_hygiene, replay_verify, VerifyReport};

use std::path::{Path, PathBuf};

use crate::env::EnvError;
use crate::learner::{LearnError, LibraryError};
use crate::llm::LlmError;
use crate::prompt::PromptError;
use crate::strips::BundleError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("train size {train_size} must be below the number of instances ({instances})")]
    Split { train_size: usize, instances: usize },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })
}

impl RunReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        read_json(path.as_ref())
    }
}
