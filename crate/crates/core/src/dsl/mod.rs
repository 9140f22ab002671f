//! The language learned actions are written in.
//!
//! A closed, Python-flavoured language: `def` functions made of action calls,
//! `for` loops over finite lists (with optional pair destructuring), `if` /
//! `elif` / `else`, assignments, `break` and `assert`. Expressions cover
//! string/int/bool/list literals, variables, indexing and slicing, `len`,
//! `zip`, `pairs`, `reverse` (or `reversed`), `list`, `slice`, `==`/`!=`,
//! `and`/`or`/`not`, and predicate queries against the current state such as
//! `clear(b)`.
//!
//! Recursion is rejected statically and loops only range over finite lists,
//! so every call terminates. The only effect a program can have is issuing
//! atomic steps through a [`Host`].
//!
//! ```
//! use learnact::dsl::parse_program;
//!
//! let program = parse_program(
//!     "def construct_stack(block_list):\n    for top, bottom in reverse(pairs(block_list)):\n        Pickup(top)\n        Stack(top, bottom)\n",
//! ).unwrap();
//! assert_eq!(program.functions.len(), 1);
//! ```

mod ast;
mod interp;
mod lexer;
mod parser;
mod value;

pub use ast::{Builtin, Expr, ExprKind, FunctionDef, Param, Program, Stmt, StmtKind};
pub use interp::{
    execute, expand, AtomicOutcome, ExpandError, Host, SimulatedHost, SubTrace, TraceEntry, TraceOutcome,
};
pub(crate) use interp::{ground_error_kind, query_state};
pub use parser::{parse_invocation, parse_program, Invocation};
pub use value::Value;

use serde::{Deserialize, Serialize};

use crate::strips::DomainDefinition;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub fn new(line: usize, column: usize) -> Self {
        Span { line, column }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{span}: {message}")]
    Syntax { span: Span, message: String },
    #[error("{span}: function `{name}` is defined more than once")]
    DuplicateFunction { name: String, span: Span },
    #[error("{span}: undefined variable `{name}`")]
    UndefinedVariable { name: String, span: Span },
    #[error("{span}: recursion is not allowed: {}", cycle.join(" -> "))]
    RecursionCycle { cycle: Vec<String>, span: Span },
    #[error("{span}: function `{name}` shadows an atomic action")]
    ShadowsAtomic { name: String, span: Span },
    #[error("{span}: {message}")]
    Unresolved { span: Span, message: String },
    #[error("undefined function `{name}`")]
    UndefinedFunction { name: String },
    #[error("{message}")]
    BadCall { message: String },
}

impl DslError {
    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Self {
        DslError::Syntax { span, message: message.into() }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            DslError::Syntax { span, .. }
            | DslError::DuplicateFunction { span, .. }
            | DslError::UndefinedVariable { span, .. }
            | DslError::RecursionCycle { span, .. }
            | DslError::ShadowsAtomic { span, .. }
            | DslError::Unresolved { span, .. } => Some(*span),
            DslError::UndefinedFunction { .. } | DslError::BadCall { .. } => None,
        }
    }
}

/// Checks a parsed program against a domain: no function shadows an atomic
/// action, every call resolves with the right arity, and every state query
/// names a declared predicate.
pub fn validate_program(program: &Program, domain: &DomainDefinition) -> Result<(), DslError> {
    for f in &program.functions {
        if domain.schema(&f.name).is_some() {
            return Err(DslError::ShadowsAtomic { name: f.name.clone(), span: f.span });
        }
        if Builtin::from_name(&f.name).is_some() || domain.predicate(&f.name).is_some() {
            return Err(DslError::Unresolved {
                span: f.span,
                message: format!("function name `{}` is reserved", f.name),
            });
        }
    }
    for f in &program.functions {
        validate_block(&f.body, program, domain)?;
    }
    Ok(())
}

fn validate_block(body: &[Stmt], program: &Program, domain: &DomainDefinition) -> Result<(), DslError> {
    for stmt in body {
        match &stmt.kind {
            StmtKind::Call { name, args } => {
                let expected = match (program.function(name), domain.schema(name)) {
                    (Some(f), _) => f.params.len(),
                    (None, Some(s)) => s.arity(),
                    (None, None) => {
                        return Err(DslError::Unresolved {
                            span: stmt.span,
                            message: format!("`{name}` is neither an atomic action nor a defined function"),
                        })
                    }
                };
                if expected != args.len() {
                    return Err(DslError::Unresolved {
                        span: stmt.span,
                        message: format!("`{name}` takes {expected} argument(s), got {}", args.len()),
                    });
                }
                args.iter().try_for_each(|a| validate_expr(a, domain))?;
            }
            StmtKind::For { iter, body, .. } => {
                validate_expr(iter, domain)?;
                validate_block(body, program, domain)?;
            }
            StmtKind::If { cond, then_body, else_body } => {
                validate_expr(cond, domain)?;
                validate_block(then_body, program, domain)?;
                validate_block(else_body, program, domain)?;
            }
            StmtKind::Let { value, .. } => validate_expr(value, domain)?,
            StmtKind::Assert { cond, .. } => validate_expr(cond, domain)?,
            StmtKind::Break => {}
        }
    }
    Ok(())
}

fn validate_expr(expr: &Expr, domain: &DomainDefinition) -> Result<(), DslError> {
    match &expr.kind {
        ExprKind::Query { predicate, args } => {
            let pred = domain.predicate(predicate).ok_or_else(|| DslError::Unresolved {
                span: expr.span,
                message: format!("unknown function or predicate `{predicate}`"),
            })?;
            if pred.arity() != args.len() {
                return Err(DslError::Unresolved {
                    span: expr.span,
                    message: format!("`{predicate}` takes {} argument(s), got {}", pred.arity(), args.len()),
                });
            }
            args.iter().try_for_each(|a| validate_expr(a, domain))
        }
        ExprKind::List(items) | ExprKind::Builtin(_, items) => items.iter().try_for_each(|a| validate_expr(a, domain)),
        ExprKind::Index(a, b) | ExprKind::Eq(a, b) | ExprKind::Ne(a, b) | ExprKind::And(a, b) | ExprKind::Or(a, b) => {
            validate_expr(a, domain)?;
            validate_expr(b, domain)
        }
        ExprKind::Slice(a, b, c) => {
            validate_expr(a, domain)?;
            for e in [b, c].into_iter().flatten() {
                validate_expr(e, domain)?;
            }
            Ok(())
        }
        ExprKind::Not(a) => validate_expr(a, domain),
        ExprKind::Str(_) | ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::parse_domain;

    fn blocks() -> DomainDefinition {
        parse_domain(include_str!("../../domains/blockworld/domain.strips")).unwrap()
    }

    #[test]
    fn validation_rejects_unresolved_names() {
        let d = blocks();
        let check = |src: &str| validate_program(&parse_program(src).unwrap(), &d);
        assert!(check("def f(b):\n    Pickup(b)\n").is_ok());
        assert!(matches!(check("def Pickup(b):\n    Putdown(b)\n"), Err(DslError::ShadowsAtomic { .. })));
        assert!(matches!(check("def f(b):\n    Fly(b)\n"), Err(DslError::Unresolved { .. })));
        assert!(matches!(check("def f(b):\n    Stack(b)\n"), Err(DslError::Unresolved { .. })));
        assert!(matches!(check("def f(b):\n    if tall(b):\n        Pickup(b)\n"), Err(DslError::Unresolved { .. })));
        assert!(matches!(check("def clear(b):\n    Pickup(b)\n"), Err(DslError::Unresolved { .. })));
    }
}
