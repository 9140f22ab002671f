use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::SubTrace;
use crate::env::{EpisodeRecord, ErrorKind, ParsedAction};

/// Which failing instance is handed to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ErrorSelection {
    /// The first failing instance in training order.
    #[default]
    First,
    /// A uniformly drawn failing instance; the draw depends only on the seed
    /// and the iteration.
    Random { seed: u64 },
}

/// One failure to learn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCase {
    pub instance_id: String,
    pub record: EpisodeRecord,
    /// Index of the step the learner is shown; `None` when the episode has
    /// no steps at all.
    pub step: Option<usize>,
    pub error_kind: Option<ErrorKind>,
    /// Atomic sub-steps of the failing learned action, if it was one.
    pub sub_trace: Option<SubTrace>,
}

impl FailureCase {
    /// Name of the action at the selected step.
    pub fn function_name(&self) -> String {
        let Some(step) = self.step.map(|i| &self.record.steps[i]) else {
            return String::new();
        };
        match &step.action {
            ParsedAction::Atomic { name, .. } | ParsedAction::Learned { name, .. } | ParsedAction::Unknown { name } => {
                name.clone()
            }
            ParsedAction::ParseFailure { .. } => step.invocation.clone(),
        }
    }

    /// `kind: message` for the selected step, or why the episode failed.
    pub fn error_info(&self) -> String {
        let step = self.step.map(|i| &self.record.steps[i]);
        match (step.and_then(|s| s.error_kind), step.and_then(|s| s.message.as_deref())) {
            (Some(kind), Some(message)) => format!("{kind}: {message}"),
            (Some(kind), None) => kind.to_string(),
            _ => match &self.record.error {
                Some(e) => format!("agent error: {e}"),
                None => "the goal was not reached before the step budget ran out".to_string(),
            },
        }
    }
}

fn is_clean(record: &EpisodeRecord) -> bool {
    record.succeeded() && record.steps.iter().all(|s| s.valid)
}

fn failure_in(record: &EpisodeRecord) -> FailureCase {
    let learned_error = record
        .steps
        .iter()
        .position(|s| !s.valid && matches!(s.action, ParsedAction::Learned { .. }));
    let step = match learned_error {
        Some(i) => Some(i),
        None if !record.succeeded() => record.steps.len().checked_sub(1),
        None => record.steps.iter().position(|s| !s.valid),
    };
    let sub_trace = step.and_then(|i| {
        let s = &record.steps[i];
        s.outcome.clone().map(|outcome| SubTrace { entries: s.entries.clone(), outcome })
    });
    FailureCase {
        instance_id: record.instance_id.clone(),
        record: record.clone(),
        step,
        error_kind: step.and_then(|i| record.steps[i].error_kind),
        sub_trace,
    }
}

/// Picks the case to learn from, or `None` when every instance was solved
/// without a single invalid step.
///
/// Within the chosen instance the first failing learned-action call is
/// preferred. Without one, a failed episode points at its last step and a
/// solved one at its first invalid step.
pub fn select_error_case(records: &[EpisodeRecord], selection: ErrorSelection, iteration: usize) -> Option<FailureCase> {
    let failing: Vec<&EpisodeRecord> = records.iter().filter(|r| !is_clean(r)).collect();
    let chosen = match selection {
        _ if failing.is_empty() => return None,
        ErrorSelection::First => failing[0],
        ErrorSelection::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(iteration as u64));
            failing[rng.gen_range(0..failing.len())]
        }
    };
    Some(failure_in(chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, TraceOutcome};
    use crate::env::{EpisodeConfig, Environment, StripsEnv};
    use crate::strips::{parse_domain, parse_instance};
    use std::sync::Arc;

    const BLOCKS: &str = include_str!("../../domains/blockworld/domain.strips");
    const EXAMPLE: &str = include_str!("../../domains/blockworld/prompt/example.inst");

    fn play(steps: &[&str], library: &str) -> EpisodeRecord {
        let domain = Arc::new(parse_domain(BLOCKS).unwrap());
        let instance = Arc::new(parse_instance(EXAMPLE).unwrap());
        let program = Arc::new(parse_program(library).unwrap());
        let mut env = StripsEnv::with_library(domain, instance, program, EpisodeConfig::default()).unwrap();
        for s in steps {
            env.step(s).unwrap();
        }
        env.into_record()
    }

    const SOLVE: [&str; 8] = [
        "Unstack('b2','b3')",
        "Putdown('b2')",
        "Unstack('b3','b1')",
        "Putdown('b3')",
        "Pickup('b2')",
        "Stack('b2','b3')",
        "Pickup('b1')",
        "Stack('b1','b2')",
    ];

    #[test]
    fn clean_runs_select_nothing() {
        let r = play(&SOLVE, "");
        assert!(select_error_case(&[r.clone(), r], ErrorSelection::First, 0).is_none());
    }

    #[test]
    fn learned_action_errors_come_first() {
        let clean = play(&SOLVE, "");
        let lib = "def lift_onto(a, b):\n    Stack(a, b)\n    Pickup(a)\n";
        let failing = play(&["Putdown('b1')", "lift_onto('b2','b1')", "Unstack('b2','b3')"], lib);
        let case = select_error_case(&[clean, failing], ErrorSelection::First, 0).unwrap();
        assert_eq!(case.step, Some(1));
        assert_eq!(case.function_name(), "lift_onto");
        assert_eq!(case.error_kind, Some(ErrorKind::PreconditionFailed));
        let trace = case.sub_trace.clone().unwrap();
        assert!(matches!(trace.outcome, TraceOutcome::Aborted { index: 0, .. }));
        assert!(case.error_info().starts_with("precondition-failed: "));
    }

    #[test]
    fn failures_without_learned_errors_point_at_the_last_step() {
        let r = play(&["Pickup('b1')", "Unstack('b2','b3')"], "");
        let case = select_error_case(&[r], ErrorSelection::First, 0).unwrap();
        assert_eq!(case.step, Some(1));
        assert!(case.sub_trace.is_none());
        assert_eq!(case.function_name(), "Unstack");
    }

    #[test]
    fn solved_with_a_slip_points_at_the_slip() {
        let mut steps = SOLVE.to_vec();
        steps.insert(2, "Pickup('b9')");
        let r = play(&steps, "");
        assert!(r.succeeded());
        let case = select_error_case(&[r], ErrorSelection::First, 0).unwrap();
        assert_eq!(case.step, Some(2));
        assert!(case.error_kind.is_some());
        assert_eq!(case.function_name(), "Pickup");
    }

    #[test]
    fn empty_episode_has_no_step() {
        let r = play(&[], "");
        let case = select_error_case(&[r], ErrorSelection::First, 0).unwrap();
        assert_eq!(case.step, None);
        assert_eq!(case.function_name(), "");
        assert!(case.error_info().contains("step budget"));
    }

    #[test]
    fn random_selection_is_seeded() {
        let bad = |s: &str| play(&[s], "");
        let records = vec![bad("Pickup('b1')"), bad("Pickup('b2')"), bad("Pickup('b3')"), bad("Putdown('b1')")];
        let pick = |seed, it| select_error_case(&records, ErrorSelection::Random { seed }, it).unwrap().record.steps[0].invocation.clone();
        assert_eq!(pick(5, 1), pick(5, 1));
        let seen: std::collections::BTreeSet<String> = (0..40).map(|i| pick(i, 0)).collect();
        assert!(seen.len() > 1);
    }
}
