//! Text layouts shared by prompts: Act-style histories, failure trajectories
//! and learned-action sub-steps.

use crate::dsl::TraceEntry;
use crate::env::EpisodeRecord;

/// An episode as the agent sees it: the first observation, then one
/// (action, observation) pair per step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub initial: String,
    pub steps: Vec<(String, String)>,
}

impl History {
    pub fn new(initial: impl Into<String>) -> Self {
        History { initial: initial.into(), steps: Vec::new() }
    }

    pub fn push(&mut self, action: impl Into<String>, observation: impl Into<String>) {
        self.steps.push((action.into(), observation.into()));
    }

    pub fn from_record(record: &EpisodeRecord) -> Self {
        History {
            initial: record.initial_observation.clone(),
            steps: record.steps.iter().map(|s| (s.invocation.clone(), s.observation.clone())).collect(),
        }
    }

    /// The first `n` steps only.
    pub fn prefix(&self, n: usize) -> Self {
        History { initial: self.initial.clone(), steps: self.steps[..n.min(self.steps.len())].to_vec() }
    }

    /// Alternating `Observation:` / `Action:` lines, ending with the latest
    /// observation. The first `skip` steps are left out and replaced by a
    /// one-line notice.
    pub fn render(&self, skip: usize) -> String {
        let skip = skip.min(self.steps.len());
        let mut lines = Vec::new();
        let first = if skip == 0 {
            &self.initial
        } else {
            lines.push(format!("({skip} earlier steps omitted)"));
            &self.steps[skip - 1].1
        };
        lines.push(format!("Observation: {first}"));
        for (action, observation) in &self.steps[skip..] {
            lines.push(format!("Action: {action}"));
            lines.push(format!("Observation: {observation}"));
        }
        lines.join("\n")
    }
}

/// The atomic steps a learned action issued, or a placeholder when it never
/// reached the environment.
pub fn format_subprocess(entries: &[TraceEntry]) -> String {
    if entries.is_empty() {
        return "(no atomic steps executed)".to_string();
    }
    entries
        .iter()
        .map(|e| format!("Action: {}\nObservation: {}", e.invocation(), e.observation))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Rough token count (four characters per token) for budget checks.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}
