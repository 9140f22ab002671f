//! The action-learning loop.
//!
//! [`action_creation`] asks the learner model for K candidate libraries of
//! learned actions. [`train`] then alternates between evaluating every
//! candidate on the training instances with the agent model
//! ([`solve_problem`]), keeping the candidate with the best
//! [`CandidateScore::mu`], localizing one failure ([`select_error_case`]) and
//! asking for K revisions of the kept library ([`action_learn`]). It stops
//! when a library solves every training instance without an invalid step, or
//! after `maxiter` evaluation rounds.

mod create;
mod learn;
mod library;
mod score;
mod select;
mod solve;
mod train;

pub use create::action_creation;
pub use learn::{action_learn, describe_failure};
pub use library::{ActionLibrary, LibraryEntry, LibraryError, Provenance};
pub use score::{score, CandidateScore};
pub use select::{select_error_case, ErrorSelection, FailureCase};
pub use solve::solve_problem;
pub use train::{evaluate, train, Candidate, IterationRecord, LearnState, StopReason, TrainOutcome};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, EpisodeConfig, StepCounting};
use crate::llm::{BackendConfig, Gateway, LlmError};
use crate::prompt::{PromptAssets, PromptError, PromptKit, RenderedPrompt};
use crate::strips::{DomainDefinition, Instance};

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("no usable library among {} creation sample(s); request digests: {}", digests.len(), digests.join(", "))]
    CreationFailed { digests: Vec<String> },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("invalid learning configuration: {0}")]
    Config(String),
}

/// Gateway errors that only spoil the current sample or episode. Everything
/// else (replay misses, exhausted scripts, cache failures) aborts the run.
pub(crate) fn is_transient(e: &LlmError) -> bool {
    matches!(e, LlmError::Upstream { .. })
}

/// Runs `f` for samples `0..k`, optionally on the rayon pool, and returns
/// the results in sample order. The first error wins.
pub(crate) fn for_each_sample<T, F>(parallel: bool, k: usize, f: F) -> Result<Vec<T>, LearnError>
where
    T: Send,
    F: Fn(usize) -> Result<T, LearnError> + Sync + Send,
{
    if parallel {
        use rayon::prelude::*;
        (0..k).into_par_iter().map(f).collect()
    } else {
        (0..k).map(f).collect()
    }
}

/// A gateway together with the model settings requests are built from.
#[derive(Debug, Clone)]
pub struct Model {
    pub gateway: Arc<Gateway>,
    pub config: BackendConfig,
}

impl Model {
    pub fn new(gateway: Arc<Gateway>, config: BackendConfig) -> Self {
        Model { gateway, config }
    }

    pub fn complete(&self, prompt: &RenderedPrompt, seed: Option<u64>) -> Result<String, LlmError> {
        self.gateway.complete(&prompt.request(&self.config).with_seed(seed))
    }
}

/// Knobs of the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    /// K: samples drawn at creation and at every revision.
    pub samples: usize,
    pub maxiter: usize,
    pub episode: EpisodeConfig,
    pub counting: StepCounting,
    pub selection: ErrorSelection,
    /// Evaluate the K candidates on a thread pool. Results are merged in
    /// sample order either way.
    pub parallel: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            samples: 4,
            maxiter: 3,
            episode: EpisodeConfig::default(),
            counting: StepCounting::Atomic,
            selection: ErrorSelection::First,
            parallel: false,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.samples == 0 {
            return Err(LearnError::Config("samples (K) must be at least 1".into()));
        }
        if self.maxiter == 0 {
            return Err(LearnError::Config("maxiter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything the loop reads but never changes.
#[derive(Debug, Clone)]
pub struct LearnContext {
    pub domain: Arc<DomainDefinition>,
    pub kit: PromptKit,
    pub assets: PromptAssets,
    /// G, the acting model.
    pub agent: Model,
    /// F, the model that writes and revises actions.
    pub learner: Model,
    pub config: LearnConfig,
}

/// The goal line shown to the agent for `instance`.
pub fn goal_text(domain: &DomainDefinition, instance: &Instance) -> String {
    crate::env::render_goal(domain, &instance.goal)
}
