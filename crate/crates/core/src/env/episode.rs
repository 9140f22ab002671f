use std::sync::Arc;

use super::render::{render_goal, render_observation, INVALID_ACTION};
use super::{
    EnvError, Environment, EpisodeEnd, EpisodeRecord, ErrorKind, Observation, ParsedAction, StepRecord, StepResult,
};
use crate::dsl::{
    execute, ground_error_kind, parse_invocation, query_state, validate_program, AtomicOutcome, DslError, Host,
    Program, TraceEntry, TraceOutcome, Value,
};
use crate::strips::{DomainDefinition, GroundAction, Instance, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Agent invocations per episode.
    pub max_steps: usize,
    /// Atomic steps per episode, counting those issued by learned actions.
    pub max_atomic_steps: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { max_steps: 40, max_atomic_steps: 400 }
    }
}

/// In-process episode over a domain instance with optional learned actions.
#[derive(Debug, Clone)]
pub struct StripsEnv {
    domain: Arc<DomainDefinition>,
    instance: Arc<Instance>,
    library: Arc<Program>,
    config: EpisodeConfig,
    initial: WorldState,
    state: WorldState,
    record: EpisodeRecord,
}

impl StripsEnv {
    pub fn new(domain: Arc<DomainDefinition>, instance: Arc<Instance>, config: EpisodeConfig) -> Result<Self, EnvError> {
        Self::with_library(domain, instance, Arc::new(Program::default()), config)
    }

    /// An environment where the functions of `library` are callable next to
    /// the atomic actions.
    pub fn with_library(
        domain: Arc<DomainDefinition>,
        instance: Arc<Instance>,
        library: Arc<Program>,
        config: EpisodeConfig,
    ) -> Result<Self, EnvError> {
        validate_program(&library, &domain)?;
        let initial = WorldState::from_instance(&domain, &instance)?;
        let text = render_observation(&domain, &initial);
        let mut env = StripsEnv {
            record: EpisodeRecord::new(instance.id.clone(), text),
            domain,
            instance,
            library,
            config,
            state: initial.clone(),
            initial,
        };
        env.restart();
        Ok(env)
    }

    fn restart(&mut self) -> Observation {
        self.state = self.initial.clone();
        let text = render_observation(&self.domain, &self.state);
        self.record = EpisodeRecord::new(self.instance.id.clone(), text.clone());
        let done = self.state.goal_satisfied();
        if done {
            self.record.reward = 1;
            self.record.end = Some(EpisodeEnd::GoalReached);
        }
        Observation { text, valid: true, done }
    }

    pub fn domain(&self) -> &DomainDefinition {
        &self.domain
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn library(&self) -> &Program {
        &self.library
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    pub fn into_record(self) -> EpisodeRecord {
        self.record
    }

    pub fn goal_text(&self) -> String {
        render_goal(&self.domain, &self.state.goal)
    }

    pub fn is_active(&self) -> bool {
        self.record.end.is_none()
    }

    fn dispatch(&mut self, invocation: &str) -> Dispatch {
        let call = match parse_invocation(invocation) {
            Ok(call) => call,
            Err(e) => {
                let name = invocation.trim().to_string();
                return Dispatch::single_failure(
                    ParsedAction::ParseFailure { message: e.to_string() },
                    TraceEntry { name, args: Vec::new(), valid: false, observation: INVALID_ACTION.into() },
                    ErrorKind::UnknownAction,
                    e.to_string(),
                );
            }
        };
        let shown: Vec<String> = call
            .args
            .iter()
            .map(|v| match v {
                Value::Str(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        let failed_entry = |name: &str| TraceEntry {
            name: name.to_string(),
            args: shown.clone(),
            valid: false,
            observation: INVALID_ACTION.into(),
        };

        if self.domain.schema(&call.name).is_some() {
            let action = ParsedAction::Atomic { name: call.name.clone(), args: shown.clone() };
            if let Some(bad) = call.args.iter().find(|v| !matches!(v, Value::Str(_))) {
                let message = format!("`{}` takes object names, got {bad}", call.name);
                return Dispatch::single_failure(action, failed_entry(&call.name), ErrorKind::BadArity, message);
            }
            let mut host = EnvHost { domain: &self.domain, state: &mut self.state, budget: 1 };
            let outcome = host.perform(&call.name, &shown);
            let entry = TraceEntry {
                name: call.name.clone(),
                args: shown.clone(),
                valid: outcome.valid(),
                observation: outcome.observation,
            };
            return match outcome.error {
                None => Dispatch { action, entries: vec![entry], outcome: None, error: None },
                Some((kind, message)) => Dispatch::single_failure(action, entry, kind, message),
            };
        }

        if self.library.function(&call.name).is_some() {
            let action = ParsedAction::Learned { name: call.name.clone(), args: shown.clone() };
            let budget = self.config.max_atomic_steps.saturating_sub(self.record.atomic_total);
            let mut host = EnvHost { domain: &self.domain, state: &mut self.state, budget };
            return match execute(&self.library, &call, &mut host) {
                Ok(trace) => {
                    let error = match &trace.outcome {
                        TraceOutcome::Completed => None,
                        TraceOutcome::Aborted { kind, message, .. } => Some((*kind, message.clone())),
                    };
                    Dispatch { action, entries: trace.entries, outcome: Some(trace.outcome), error }
                }
                Err(e) => {
                    let kind = match e {
                        DslError::UndefinedFunction { .. } => ErrorKind::UnknownAction,
                        _ => ErrorKind::BadArity,
                    };
                    Dispatch::single_failure(action, failed_entry(&call.name), kind, e.to_string())
                }
            };
        }

        let message = format!("`{}` is not an available action", call.name);
        Dispatch::single_failure(
            ParsedAction::Unknown { name: call.name.clone() },
            failed_entry(&call.name),
            ErrorKind::UnknownAction,
            message,
        )
    }
}

struct Dispatch {
    action: ParsedAction,
    entries: Vec<TraceEntry>,
    outcome: Option<TraceOutcome>,
    error: Option<(ErrorKind, String)>,
}

impl Dispatch {
    fn single_failure(action: ParsedAction, entry: TraceEntry, kind: ErrorKind, message: String) -> Self {
        Dispatch { action, entries: vec![entry], outcome: None, error: Some((kind, message)) }
    }
}

impl Environment for StripsEnv {
    fn reset(&mut self) -> Result<Observation, EnvError> {
        Ok(self.restart())
    }

    fn step(&mut self, invocation: &str) -> Result<StepResult, EnvError> {
        if !self.is_active() {
            return Err(EnvError::EpisodeOver);
        }
        let Dispatch { action, entries, outcome, error } = self.dispatch(invocation);
        let valid = error.is_none();
        let done = self.state.goal_satisfied();
        let text = if valid { render_observation(&self.domain, &self.state) } else { INVALID_ACTION.to_string() };

        self.record.atomic_total += entries.len();
        self.record.atomic_ok += entries.iter().filter(|e| e.valid).count();
        self.record.steps.push(StepRecord {
            invocation: invocation.trim().to_string(),
            action,
            entries,
            outcome,
            valid,
            error_kind: error.as_ref().map(|(k, _)| *k),
            message: error.as_ref().map(|(_, m)| m.clone()),
            observation: text.clone(),
            done,
        });
        self.record.reward = u8::from(done);
        self.record.end = if done {
            Some(EpisodeEnd::GoalReached)
        } else if self.record.steps.len() >= self.config.max_steps {
            Some(EpisodeEnd::StepBudget)
        } else if self.record.atomic_total >= self.config.max_atomic_steps {
            Some(EpisodeEnd::AtomicBudget)
        } else {
            None
        };

        let (error_kind, message) = match error {
            Some((k, m)) => (Some(k), Some(m)),
            None => (None, None),
        };
        Ok(StepResult { observation: Observation { text, valid, done }, error_kind, message })
    }
}

/// Live host: atomic steps from learned actions change the episode state.
struct EnvHost<'a> {
    domain: &'a DomainDefinition,
    state: &'a mut WorldState,
    budget: usize,
}

impl Host for EnvHost<'_> {
    fn query(&self, predicate: &str, args: &[String]) -> Result<bool, String> {
        query_state(self.domain, self.state, predicate, args)
    }

    fn perform(&mut self, name: &str, args: &[String]) -> AtomicOutcome {
        self.budget = self.budget.saturating_sub(1);
        let fail = |kind, message: String| AtomicOutcome { error: Some((kind, message)), observation: INVALID_ACTION.into() };
        let action = match GroundAction::ground(self.domain, &self.state.objects, name, args) {
            Ok(a) => a,
            Err(e) => return fail(ground_error_kind(&e), e.to_string()),
        };
        match self.state.apply(&action) {
            Ok(next) => {
                *self.state = next;
                AtomicOutcome { error: None, observation: render_observation(self.domain, self.state) }
            }
            Err(e) => fail(ErrorKind::PreconditionFailed, e.to_string()),
        }
    }

    fn remaining_budget(&self) -> usize {
        self.budget
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::env::{step_accuracy, StepCounting};
    use crate::strips::{parse_domain, parse_instance};

    const BLOCKS: &str = include_str!("../../domains/blockworld/domain.strips");
    const TRANSCRIPT: &str = include_str!("../../domains/blockworld/prompt/example.inst");

    fn env_with(library: &str) -> StripsEnv {
        let domain = Arc::new(parse_domain(BLOCKS).unwrap());
        let instance = Arc::new(parse_instance(TRANSCRIPT).unwrap());
        let program = Arc::new(parse_program(library).unwrap());
        StripsEnv::with_library(domain, instance, program, EpisodeConfig::default()).unwrap()
    }

    fn env() -> StripsEnv {
        env_with("")
    }

    #[test]
    fn reset_renders_initial_tower() {
        let mut env = env();
        let obs = env.reset().unwrap();
        assert_eq!(obs.text, "b2 is on b3. b3 is on b1. b1 is on the table. Robot arm is empty. The b2 is clear.");
        assert!(obs.valid && !obs.done);
    }

    #[test]
    fn invalid_step_leaves_state_alone() {
        let mut env = env();
        let before = env.state().clone();
        let r = env.step("Pickup('b3')").unwrap();
        assert_eq!(r.observation.text, INVALID_ACTION);
        assert_eq!(r.error_kind, Some(ErrorKind::PreconditionFailed));
        assert_eq!(env.state(), &before);
        assert_eq!(env.record().atomic_total, 1);
        assert_eq!(env.record().atomic_ok, 0);
    }

    #[test]
    fn error_kinds() {
        let mut env = env();
        assert_eq!(env.step("Frobnicate('x')").unwrap().error_kind, Some(ErrorKind::UnknownAction));
        assert_eq!(env.step("Pickup('b1','b2')").unwrap().error_kind, Some(ErrorKind::BadArity));
        assert_eq!(env.step("Pickup(").unwrap().error_kind, Some(ErrorKind::UnknownAction));
        assert_eq!(env.step("Stack('b2','b2')").unwrap().error_kind, Some(ErrorKind::BadArity));
        assert_eq!(env.record().atomic_total, 4);
    }

    #[test]
    fn goal_latches_and_refuses_further_steps() {
        let mut env = env();
        for inv in ["Unstack('b2','b3')", "Putdown('b2')", "Unstack('b3','b1')", "Putdown('b3')", "Pickup('b2')"] {
            assert!(env.step(inv).unwrap().observation.valid, "{inv}");
        }
        env.step("Stack('b2','b3')").unwrap();
        env.step("Pickup('b1')").unwrap();
        let last = env.step("Stack('b1','b2')").unwrap();
        assert!(last.observation.done);
        assert!(last.observation.text.ends_with(" The goal is satisfied."));
        assert_eq!(env.record().reward, 1);
        assert!(matches!(env.step("Unstack('b1','b2')"), Err(EnvError::EpisodeOver)));
        assert_eq!(step_accuracy(env.record(), StepCounting::Atomic), 1.0);
    }

    #[test]
    fn step_budget_ends_episode_with_zero_reward() {
        let domain = Arc::new(parse_domain(BLOCKS).unwrap());
        let instance = Arc::new(parse_instance(TRANSCRIPT).unwrap());
        let config = EpisodeConfig { max_steps: 2, max_atomic_steps: 100 };
        let mut env = StripsEnv::new(domain, instance, config).unwrap();
        env.step("Pickup('b1')").unwrap();
        env.step("Pickup('b1')").unwrap();
        assert_eq!(env.record().end, Some(EpisodeEnd::StepBudget));
        assert_eq!(env.record().reward, 0);
        assert!(env.step("Pickup('b1')").is_err());
    }

    #[test]
    fn learned_action_failure_keeps_prefix() {
        let lib = "def take_down(top, below):\n    Unstack(top, below)\n    Putdown(top)\n    Pickup(below)\n";
        let mut env = env_with(lib);
        let r = env.step("take_down('b2','b3')").unwrap();
        assert!(!r.observation.valid);
        assert_eq!(r.error_kind, Some(ErrorKind::PreconditionFailed));
        // Pickup(b3) fails because b3 still sits on b1, but b2 is already down
        assert!(env.state().holds(&crate::strips::Atom::new("ontable", ["b2"])));
        let step = &env.record().steps[0];
        assert_eq!(step.entries.len(), 3);
        assert!(matches!(step.outcome, Some(TraceOutcome::Aborted { index: 2, .. })));
        assert_eq!((env.record().atomic_ok, env.record().atomic_total), (2, 3));
        assert_eq!(env.record().step_counts(StepCounting::Invocation), (0, 1));
    }

    #[test]
    fn learned_action_bad_call_counts_once() {
        let lib = "def lift(b):\n    Pickup(b)\n";
        let mut env = env_with(lib);
        let r = env.step("lift('b1','b2')").unwrap();
        assert_eq!(r.error_kind, Some(ErrorKind::BadArity));
        assert_eq!(env.record().atomic_total, 1);
    }

    #[test]
    fn replay_reproduces_record() {
        let mut env = env();
        for inv in ["Unstack('b2','b3')", "Pickup('b3')", "Putdown('b2')", "Frob()"] {
            env.step(inv).unwrap();
        }
        let first = env.record().clone();
        env.reset().unwrap();
        for inv in first.invocations().map(str::to_string).collect::<Vec<_>>() {
            env.step(&inv).unwrap();
        }
        assert_eq!(&first, env.record());
    }

    #[test]
    fn goal_already_satisfied_at_reset() {
        let domain = Arc::new(parse_domain(BLOCKS).unwrap());
        let text = TRANSCRIPT.replace("on(b1,b2) on(b2,b3)", "on(b2,b3)");
        let instance = Arc::new(parse_instance(&text).unwrap());
        let mut env = StripsEnv::new(domain, instance, EpisodeConfig::default()).unwrap();
        let obs = env.reset().unwrap();
        assert!(obs.done);
        assert_eq!(env.record().reward, 1);
    }
}
