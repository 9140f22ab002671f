use serde::{Deserialize, Serialize};

use super::ast::{Builtin, Expr, ExprKind, FunctionDef, Program, Stmt, StmtKind};
use super::parser::Invocation;
use super::value::Value;
use super::{DslError, Span};
use crate::env::ErrorKind;
use crate::strips::{DomainDefinition, GroundAction, GroundError, WorldState};

/// What the interpreter needs from the world it acts on.
pub trait Host {
    /// Membership of `predicate(args)` in the current state.
    fn query(&self, predicate: &str, args: &[String]) -> Result<bool, String>;
    /// Issues one atomic step.
    fn perform(&mut self, name: &str, args: &[String]) -> AtomicOutcome;
    /// Atomic steps that may still be issued.
    fn remaining_budget(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicOutcome {
    pub error: Option<(ErrorKind, String)>,
    pub observation: String,
}

impl AtomicOutcome {
    pub fn valid(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub name: String,
    pub args: Vec<String>,
    pub valid: bool,
    pub observation: String,
}

impl TraceEntry {
    pub fn invocation(&self) -> String {
        let quoted: Vec<String> = self.args.iter().map(|a| format!("'{a}'")).collect();
        format!("{}({})", self.name, quoted.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TraceOutcome {
    Completed,
    /// Execution stopped at `index`: the position of the failing entry for
    /// atomic failures, or the number of entries issued for other aborts.
    Aborted { index: usize, kind: ErrorKind, message: String },
}

/// The atomic steps issued by one learned-action call, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTrace {
    pub entries: Vec<TraceEntry>,
    pub outcome: TraceOutcome,
}

impl SubTrace {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, TraceOutcome::Completed)
    }

    pub fn valid_count(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }
}

struct Abort {
    kind: ErrorKind,
    message: String,
}

fn runtime(span: Span, message: impl std::fmt::Display) -> Abort {
    Abort { kind: ErrorKind::DslRuntimeError, message: format!("line {}: {message}", span.line) }
}

enum Flow {
    Normal,
    Break,
}

struct Frame {
    scopes: Vec<Vec<(String, Value)>>,
}

impl Frame {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.scopes.iter().rev().flat_map(|s| s.iter().rev()).find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn assign(&mut self, name: &str, value: Value) {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.iter_mut().find(|(n, _)| n == name) {
                slot.1 = value;
                return;
            }
        }
        self.scopes.last_mut().expect("frame has a scope").push((name.to_string(), value));
    }
}

struct Interp<'a, H: Host> {
    program: &'a Program,
    host: &'a mut H,
    entries: Vec<TraceEntry>,
}

fn check_args(f: &FunctionDef, args: &[Value]) -> Result<(), String> {
    if f.params.len() != args.len() {
        return Err(format!("`{}` takes {} argument(s), got {}", f.name, f.params.len(), args.len()));
    }
    for (p, v) in f.params.iter().zip(args) {
        let ok = match p.ty.as_deref() {
            None => true,
            Some("list") => matches!(v, Value::List(_)),
            Some("int") => matches!(v, Value::Int(_)),
            Some("bool") => matches!(v, Value::Bool(_)),
            Some(_) => matches!(v, Value::Str(_)),
        };
        if !ok {
            return Err(format!(
                "argument `{}` of `{}` must be {}, got {}",
                p.name,
                f.name,
                p.ty.as_deref().unwrap_or("any"),
                v.type_name()
            ));
        }
    }
    Ok(())
}

impl<H: Host> Interp<'_, H> {
    fn call_function(&mut self, f: &FunctionDef, args: Vec<Value>) -> Result<(), Abort> {
        let mut frame = Frame { scopes: vec![f.params.iter().map(|p| p.name.clone()).zip(args).collect()] };
        self.block(&f.body, &mut frame)?;
        Ok(())
    }

    fn block(&mut self, body: &[Stmt], frame: &mut Frame) -> Result<Flow, Abort> {
        frame.scopes.push(Vec::new());
        let result = self.block_inner(body, frame);
        frame.scopes.pop();
        result
    }

    fn block_inner(&mut self, body: &[Stmt], frame: &mut Frame) -> Result<Flow, Abort> {
        for stmt in body {
            match &stmt.kind {
                StmtKind::Call { name, args } => {
                    let values = args.iter().map(|a| self.eval(a, frame)).collect::<Result<Vec<_>, _>>()?;
                    self.call(name, values, stmt.span)?;
                }
                StmtKind::For { vars, iter, body } => {
                    let items = match self.eval(iter, frame)? {
                        Value::List(items) => items,
                        other => return Err(runtime(stmt.span, format!("cannot iterate over {}", other.type_name()))),
                    };
                    for item in items {
                        let bindings = if vars.len() == 1 {
                            vec![(vars[0].clone(), item)]
                        } else {
                            match item {
                                Value::List(pair) if pair.len() == 2 => {
                                    vars.iter().cloned().zip(pair).collect()
                                }
                                other => {
                                    return Err(runtime(stmt.span, format!("cannot unpack {other} into two variables")))
                                }
                            }
                        };
                        frame.scopes.push(bindings);
                        let flow = self.block(body, frame);
                        frame.scopes.pop();
                        if let Flow::Break = flow? {
                            break;
                        }
                    }
                }
                StmtKind::If { cond, then_body, else_body } => {
                    let flow = if self.truth(cond, frame)? {
                        self.block(then_body, frame)?
                    } else {
                        self.block(else_body, frame)?
                    };
                    if let Flow::Break = flow {
                        return Ok(Flow::Break);
                    }
                }
                StmtKind::Let { name, value } => {
                    let v = self.eval(value, frame)?;
                    frame.assign(name, v);
                }
                StmtKind::Break => return Ok(Flow::Break),
                StmtKind::Assert { cond, message } => {
                    if !self.truth(cond, frame)? {
                        return Err(runtime(stmt.span, format!("assertion failed: {message}")));
                    }
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn call(&mut self, name: &str, args: Vec<Value>, span: Span) -> Result<(), Abort> {
        if let Some(f) = self.program.function(name) {
            check_args(f, &args).map_err(|m| runtime(span, m))?;
            return self.call_function(f, args);
        }
        let args: Vec<String> = args
            .into_iter()
            .map(|v| match v {
                Value::Str(s) => Ok(s),
                other => Err(runtime(span, format!("argument {other} of `{name}` is not an object name"))),
            })
            .collect::<Result<_, _>>()?;
        if self.host.remaining_budget() == 0 {
            return Err(Abort { kind: ErrorKind::DslRuntimeError, message: "step budget exhausted".into() });
        }
        let outcome = self.host.perform(name, &args);
        let valid = outcome.valid();
        self.entries.push(TraceEntry { name: name.to_string(), args, valid, observation: outcome.observation });
        match outcome.error {
            None => Ok(()),
            Some((kind, message)) => Err(Abort { kind, message }),
        }
    }

    fn truth(&mut self, cond: &Expr, frame: &Frame) -> Result<bool, Abort> {
        match self.eval(cond, frame)? {
            Value::Bool(b) => Ok(b),
            other => Err(runtime(cond.span, format!("condition must be bool, got {}", other.type_name()))),
        }
    }

    fn eval(&mut self, expr: &Expr, frame: &Frame) -> Result<Value, Abort> {
        let span = expr.span;
        Ok(match &expr.kind {
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Int(n) => Value::Int(*n),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::List(items) => Value::List(items.iter().map(|e| self.eval(e, frame)).collect::<Result<_, _>>()?),
            ExprKind::Var(name) => frame
                .lookup(name)
                .cloned()
                .ok_or_else(|| runtime(span, format!("undefined variable `{name}`")))?,
            ExprKind::Index(target, index) => {
                let target = self.eval(target, frame)?;
                let index = self.eval(index, frame)?;
                match (target, index) {
                    (Value::List(items), Value::Int(i)) => {
                        let len = items.len() as i64;
                        let at = if i < 0 { i + len } else { i };
                        if at < 0 || at >= len {
                            return Err(runtime(span, format!("index {i} out of range for list of length {len}")));
                        }
                        items[at as usize].clone()
                    }
                    (t, i) => return Err(runtime(span, format!("cannot index {} with {}", t.type_name(), i.type_name()))),
                }
            }
            ExprKind::Slice(target, start, end) => {
                let target = self.eval(target, frame)?;
                let start = start.as_ref().map(|e| self.eval(e, frame)).transpose()?;
                let end = end.as_ref().map(|e| self.eval(e, frame)).transpose()?;
                slice(target, start, end).map_err(|m| runtime(span, m))?
            }
            ExprKind::Builtin(b, args) => {
                let args = args.iter().map(|e| self.eval(e, frame)).collect::<Result<Vec<_>, _>>()?;
                builtin(*b, args).map_err(|m| runtime(span, m))?
            }
            ExprKind::Query { predicate, args } => {
                let args = args
                    .iter()
                    .map(|e| match self.eval(e, frame)? {
                        Value::Str(s) => Ok(s),
                        other => Err(runtime(span, format!("argument {other} of `{predicate}` is not an object name"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Value::Bool(self.host.query(predicate, &args).map_err(|m| runtime(span, m))?)
            }
            ExprKind::Eq(a, b) => Value::Bool(self.eval(a, frame)? == self.eval(b, frame)?),
            ExprKind::Ne(a, b) => Value::Bool(self.eval(a, frame)? != self.eval(b, frame)?),
            ExprKind::And(a, b) => Value::Bool(self.truth(a, frame)? && self.truth(b, frame)?),
            ExprKind::Or(a, b) => Value::Bool(self.truth(a, frame)? || self.truth(b, frame)?),
            ExprKind::Not(a) => Value::Bool(!self.truth(a, frame)?),
        })
    }
}

fn clamp_index(i: i64, len: usize) -> usize {
    let len = len as i64;
    let i = if i < 0 { i + len } else { i };
    i.clamp(0, len) as usize
}

fn slice(target: Value, start: Option<Value>, end: Option<Value>) -> Result<Value, String> {
    let items = match target {
        Value::List(items) => items,
        other => return Err(format!("cannot slice {}", other.type_name())),
    };
    let bound = |v: Option<Value>, default: usize| match v {
        None => Ok(default),
        Some(Value::Int(i)) => Ok(clamp_index(i, items.len())),
        Some(other) => Err(format!("slice bound must be int, got {}", other.type_name())),
    };
    let s = bound(start, 0)?;
    let e = bound(end, items.len())?;
    Ok(Value::List(if s < e { items[s..e].to_vec() } else { Vec::new() }))
}

fn as_list(v: Value, what: &str) -> Result<Vec<Value>, String> {
    match v {
        Value::List(items) => Ok(items),
        other => Err(format!("`{what}` expects a list, got {}", other.type_name())),
    }
}

fn builtin(b: Builtin, mut args: Vec<Value>) -> Result<Value, String> {
    match b {
        Builtin::Len => Ok(Value::Int(as_list(args.remove(0), "len")?.len() as i64)),
        Builtin::Reverse => {
            let mut items = as_list(args.remove(0), "reverse")?;
            items.reverse();
            Ok(Value::List(items))
        }
        Builtin::Zip => {
            let a = as_list(args.remove(0), "zip")?;
            let b = as_list(args.remove(0), "zip")?;
            Ok(Value::List(a.into_iter().zip(b).map(|(x, y)| Value::List(vec![x, y])).collect()))
        }
        Builtin::Pairs => {
            let items = as_list(args.remove(0), "pairs")?;
            Ok(Value::List(items.windows(2).map(|w| Value::List(w.to_vec())).collect()))
        }
        Builtin::List => Ok(Value::List(as_list(args.remove(0), "list")?)),
        Builtin::Slice => {
            let target = args.remove(0);
            let start = Some(args.remove(0));
            let end = args.pop();
            slice(target, start, end)
        }
    }
}

/// Runs a learned-action call against `host`, recording every atomic step.
///
/// Errors that prevent the call from starting (unknown function, wrong
/// argument count or type) are returned as `Err`; failures during execution
/// end the trace with [`TraceOutcome::Aborted`] and keep the applied prefix.
pub fn execute<H: Host>(program: &Program, call: &Invocation, host: &mut H) -> Result<SubTrace, DslError> {
    let f = program
        .function(&call.name)
        .ok_or_else(|| DslError::UndefinedFunction { name: call.name.clone() })?;
    check_args(f, &call.args).map_err(|message| DslError::BadCall { message })?;
    let mut interp = Interp { program, host, entries: Vec::new() };
    let result = interp.call_function(f, call.args.clone());
    let entries = interp.entries;
    let outcome = match result {
        Ok(()) => TraceOutcome::Completed,
        Err(abort) => {
            let index = match entries.last() {
                Some(last) if !last.valid => entries.len() - 1,
                _ => entries.len(),
            };
            TraceOutcome::Aborted { index, kind: abort.kind, message: abort.message }
        }
    };
    Ok(SubTrace { entries, outcome })
}

/// Applies atomic steps to a private copy of a state.
pub struct SimulatedHost<'a> {
    pub domain: &'a DomainDefinition,
    pub state: WorldState,
    pub budget: usize,
    pub issued: Vec<GroundAction>,
}

impl<'a> SimulatedHost<'a> {
    pub fn new(domain: &'a DomainDefinition, state: WorldState) -> Self {
        SimulatedHost { domain, state, budget: usize::MAX, issued: Vec::new() }
    }
}

pub(crate) fn ground_error_kind(e: &GroundError) -> ErrorKind {
    match e {
        GroundError::UnknownAction(_) => ErrorKind::UnknownAction,
        _ => ErrorKind::BadArity,
    }
}

impl Host for SimulatedHost<'_> {
    fn query(&self, predicate: &str, args: &[String]) -> Result<bool, String> {
        query_state(self.domain, &self.state, predicate, args)
    }

    fn perform(&mut self, name: &str, args: &[String]) -> AtomicOutcome {
        self.budget = self.budget.saturating_sub(1);
        match GroundAction::ground(self.domain, &self.state.objects, name, args) {
            Err(e) => AtomicOutcome { error: Some((ground_error_kind(&e), e.to_string())), observation: String::new() },
            Ok(action) => match self.state.apply(&action) {
                Ok(next) => {
                    self.state = next;
                    self.issued.push(action);
                    AtomicOutcome { error: None, observation: String::new() }
                }
                Err(e) => {
                    AtomicOutcome { error: Some((ErrorKind::PreconditionFailed, e.to_string())), observation: String::new() }
                }
            },
        }
    }

    fn remaining_budget(&self) -> usize {
        self.budget
    }
}

pub(crate) fn query_state(
    domain: &DomainDefinition,
    state: &WorldState,
    predicate: &str,
    args: &[String],
) -> Result<bool, String> {
    let pred = domain.predicate(predicate).ok_or_else(|| format!("unknown predicate `{predicate}`"))?;
    if pred.arity() != args.len() {
        return Err(format!("`{predicate}` takes {} argument(s), got {}", pred.arity(), args.len()));
    }
    Ok(state.holds(&crate::strips::Atom::new(predicate, args.iter().cloned())))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpandError {
    #[error(transparent)]
    Call(#[from] DslError),
    #[error("expansion aborted after {} step(s): {message}", prefix.len())]
    Aborted { prefix: Vec<GroundAction>, kind: ErrorKind, message: String },
}

/// The atomic actions a call would issue from `state`, computed on a copy.
pub fn expand(
    program: &Program,
    call: &Invocation,
    domain: &DomainDefinition,
    state: &WorldState,
) -> Result<Vec<GroundAction>, ExpandError> {
    let mut host = SimulatedHost::new(domain, state.clone());
    let trace = execute(program, call, &mut host)?;
    match trace.outcome {
        TraceOutcome::Completed => Ok(host.issued),
        TraceOutcome::Aborted { kind, message, .. } => Err(ExpandError::Aborted { prefix: host.issued, kind, message }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_invocation, parse_program, validate_program};
    use crate::strips::{parse_domain, parse_instance};

    const LIBRARY: &str = "\
def construct_stack(block_list):
    for top_block, bottom_block in reverse(zip(block_list, block_list[1:])):
        Pickup(top_block)
        Stack(top_block, bottom_block)

def dismantle_stack_until(block_list, block_target):
    for top_block, bottom_block in zip(block_list, block_list[1:]):
        if top_block == block_target:
            break
        Unstack(top_block, bottom_block)
        Putdown(top_block)
";

    fn setup(instance: &str) -> (DomainDefinition, WorldState, Program) {
        let d = parse_domain(include_str!("../../domains/blockworld/domain.strips")).unwrap();
        let i = parse_instance(instance).unwrap();
        let s = WorldState::from_instance(&d, &i).unwrap();
        let p = parse_program(LIBRARY).unwrap();
        validate_program(&p, &d).unwrap();
        (d, s, p)
    }

    fn names(actions: &[GroundAction]) -> Vec<String> {
        actions.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn learned_case_expands_to_eight_steps() {
        let (d, s, p) = setup(include_str!("../../domains/blockworld/instances/bw-learned-case.inst"));
        let down = expand(&p, &parse_invocation("dismantle_stack_until(['b3','b2','b1'],'b1')").unwrap(), &d, &s).unwrap();
        assert_eq!(names(&down), ["Unstack('b3','b2')", "Putdown('b3')", "Unstack('b2','b1')", "Putdown('b2')"]);
        let mut state = s.clone();
        for a in &down {
            state = state.apply(a).unwrap();
        }
        let up = expand(&p, &parse_invocation("construct_stack(['b1','b2','b3'])").unwrap(), &d, &state).unwrap();
        assert_eq!(names(&up), ["Pickup('b2')", "Stack('b2','b3')", "Pickup('b1')", "Stack('b1','b2')"]);
        for a in &up {
            state = state.apply(a).unwrap();
        }
        assert!(state.goal_satisfied());
    }

    #[test]
    fn python_spelling_of_construct_stack_is_accepted() {
        let (d, s, p) = setup(include_str!("../../domains/blockworld/instances/bw-learned-case.inst"));
        let python = parse_program(
            "def construct_stack(block_list):\n    for top_block, bottom_block in reversed(list(zip(block_list, block_list[1:]))):\n        Pickup(top_block)\n        Stack(top_block, bottom_block)\n",
        )
        .unwrap();
        let mut state = s.clone();
        for a in expand(&p, &parse_invocation("dismantle_stack_until(['b3','b2','b1'],'b1')").unwrap(), &d, &s).unwrap() {
            state = state.apply(&a).unwrap();
        }
        let call = parse_invocation("construct_stack(['b1','b2','b3'])").unwrap();
        assert_eq!(expand(&python, &call, &d, &state).unwrap(), expand(&p, &call, &d, &state).unwrap());
    }

    #[test]
    fn failing_step_aborts_with_prefix() {
        let (d, s, p) = setup(include_str!("../../domains/blockworld/prompt/example.inst"));
        // b1 is not clear at the start, so the first Pickup fails
        let mut host = SimulatedHost::new(&d, s);
        let trace = execute(&p, &parse_invocation("construct_stack(['b1','b2','b3'])").unwrap(), &mut host).unwrap();
        assert_eq!(trace.entries.len(), 1);
        assert!(matches!(trace.outcome, TraceOutcome::Aborted { index: 0, kind: ErrorKind::PreconditionFailed, .. }));
        assert!(host.issued.is_empty());
    }

    #[test]
    fn budget_exhaustion_is_a_runtime_error() {
        let (d, s, p) = setup(include_str!("../../domains/blockworld/instances/bw-learned-case.inst"));
        let mut host = SimulatedHost::new(&d, s);
        host.budget = 2;
        let call = parse_invocation("dismantle_stack_until(['b3','b2','b1'],'b1')").unwrap();
        let trace = execute(&p, &call, &mut host).unwrap();
        assert_eq!(trace.valid_count(), 2);
        assert!(matches!(trace.outcome, TraceOutcome::Aborted { index: 2, kind: ErrorKind::DslRuntimeError, .. }));
    }

    #[test]
    fn runtime_type_errors_and_assertions_abort() {
        let (d, s, _) = setup(include_str!("../../domains/blockworld/prompt/example.inst"));
        let p = parse_program("def f(xs):\n    assert len(xs) == 2, 'two blocks'\n    Pickup(xs[5])\n").unwrap();
        let mut host = SimulatedHost::new(&d, s.clone());
        let t = execute(&p, &parse_invocation("f(['b1'])").unwrap(), &mut host).unwrap();
        assert!(matches!(&t.outcome, TraceOutcome::Aborted { message, .. } if message.contains("two blocks")));
        let t = execute(&p, &parse_invocation("f(['b1','b2'])").unwrap(), &mut host).unwrap();
        assert!(matches!(t.outcome, TraceOutcome::Aborted { kind: ErrorKind::DslRuntimeError, .. }));
        assert!(t.entries.is_empty());
    }

    #[test]
    fn queries_read_the_live_state() {
        let (d, s, _) = setup(include_str!("../../domains/blockworld/prompt/example.inst"));
        let p = parse_program("def clear_top(b, below):\n    if clear(b):\n        Unstack(b, below)\n        Putdown(b)\n    if clear(below):\n        Unstack(below, 'b1')\n").unwrap();
        validate_program(&p, &d).unwrap();
        let out = expand(&p, &parse_invocation("clear_top('b2','b3')").unwrap(), &d, &s).unwrap();
        assert_eq!(names(&out), ["Unstack('b2','b3')", "Putdown('b2')", "Unstack('b3','b1')"]);
    }

    #[test]
    fn bad_call_is_an_error_not_a_trace() {
        let (d, s, p) = setup(include_str!("../../domains/blockworld/prompt/example.inst"));
        let mut host = SimulatedHost::new(&d, s);
        assert!(matches!(
            execute(&p, &parse_invocation("construct_stack()").unwrap(), &mut host),
            Err(DslError::BadCall { .. })
        ));
        assert!(matches!(
            execute(&p, &parse_invocation("nope()").unwrap(), &mut host),
            Err(DslError::UndefinedFunction { .. })
        ));
    }
}
