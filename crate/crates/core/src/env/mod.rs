//! Episode runtime: textual observations, validity feedback, reward and step
//! accounting over a domain instance.
//!
//! [`StripsEnv`] runs in-process against a parsed domain and an optional
//! library of learned actions. [`ProcessEnv`] and [`serve`] speak the same
//! [`Environment`] contract over newline-delimited JSON on stdio, so an
//! external simulator can stand in for the built-in one.

mod adapter;
mod episode;
mod render;

pub use adapter::{serve, ProcessEnv, Request, Response};
pub use episode::{EpisodeConfig, StripsEnv};
pub use render::{render_goal, render_observation, render_state, GOAL_SUFFIX, INVALID_ACTION};

use serde::{Deserialize, Serialize};

use crate::dsl::{DslError, TraceEntry, TraceOutcome};
use crate::strips::StateError;

/// Why a step did not take effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    UnknownAction,
    BadArity,
    PreconditionFailed,
    DslRuntimeError,
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorKind::UnknownAction => "unknown-action",
            ErrorKind::BadArity => "bad-arity",
            ErrorKind::PreconditionFailed => "precondition-failed",
            ErrorKind::DslRuntimeError => "dsl-runtime-error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub valid: bool,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub error_kind: Option<ErrorKind>,
    /// Human-readable detail for the error, when there is one.
    pub message: Option<String>,
}

/// What a step counts towards step accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCounting {
    /// Every atomic step, including those issued inside learned actions.
    #[default]
    Atomic,
    /// One count per agent invocation.
    Invocation,
}

/// How an invocation was interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParsedAction {
    Atomic { name: String, args: Vec<String> },
    Learned { name: String, args: Vec<String> },
    Unknown { name: String },
    ParseFailure { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub invocation: String,
    pub action: ParsedAction,
    /// The atomic sub-steps this invocation produced.
    pub entries: Vec<TraceEntry>,
    /// Set for learned-action calls.
    pub outcome: Option<TraceOutcome>,
    pub valid: bool,
    pub error_kind: Option<ErrorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub observation: String,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeEnd {
    GoalReached,
    StepBudget,
    AtomicBudget,
    /// The agent could not produce an action, e.g. its backend failed.
    AgentError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub instance_id: String,
    pub initial_observation: String,
    pub steps: Vec<StepRecord>,
    pub reward: u8,
    pub atomic_total: usize,
    pub atomic_ok: usize,
    pub end: Option<EpisodeEnd>,
    /// Why the episode was cut short by something other than a budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeRecord {
    pub fn new(instance_id: impl Into<String>, initial_observation: impl Into<String>) -> Self {
        EpisodeRecord {
            instance_id: instance_id.into(),
            initial_observation: initial_observation.into(),
            steps: Vec::new(),
            reward: 0,
            atomic_total: 0,
            atomic_ok: 0,
            end: None,
            error: None,
        }
    }

    /// `(successful, total)` under the given counting mode.
    pub fn step_counts(&self, counting: StepCounting) -> (usize, usize) {
        match counting {
            StepCounting::Atomic => (self.atomic_ok, self.atomic_total),
            StepCounting::Invocation => (self.steps.iter().filter(|s| s.valid).count(), self.steps.len()),
        }
    }

    pub fn invocations(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.invocation.as_str())
    }

    pub fn succeeded(&self) -> bool {
        self.reward == 1
    }
}

/// Fraction of successful steps; an empty record scores 0.
pub fn step_accuracy(record: &EpisodeRecord, counting: StepCounting) -> f64 {
    match record.step_counts(counting) {
        (_, 0) => 0.0,
        (ok, total) => ok as f64 / total as f64,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("the episode is over")]
    EpisodeOver,
    #[error("instance does not fit the domain: {0}")]
    Instance(#[from] StateError),
    #[error("invalid action library: {0}")]
    Library(#[from] DslError),
    #[error("environment protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The episode loop an agent interacts with.
pub trait Environment {
    fn reset(&mut self) -> Result<Observation, EnvError>;
    /// Executes one invocation such as `Pickup('b1')`. Refused once the
    /// episode has ended.
    fn step(&mut self, invocation: &str) -> Result<StepResult, EnvError>;
}
