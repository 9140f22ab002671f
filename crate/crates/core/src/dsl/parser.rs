use std::collections::{HashMap, HashSet};

use super::ast::{Builtin, Expr, ExprKind, FunctionDef, Param, Program, Stmt, StmtKind};
use super::lexer::{tokenize, Tok, Token};
use super::value::Value;
use super::{DslError, Span};

const KEYWORDS: &[&str] =
    &["def", "for", "in", "if", "elif", "else", "break", "assert", "pass", "and", "or", "not", "True", "False"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Int(n) => format!("integer {n}"),
            Tok::Op(op) => format!("`{op}`"),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indented block".into(),
            Tok::Dedent => "end of block".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn unexpected(&self, expected: &str) -> DslError {
        DslError::syntax(self.span(), format!("expected {expected}, found {}", Self::describe(self.peek())))
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DslError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), DslError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{op}`")))
        }
    }

    fn expect_newline(&mut self) -> Result<(), DslError> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            _ => Err(self.unexpected("end of line")),
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<(String, Span), DslError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn program(&mut self, source: &str) -> Result<Program, DslError> {
        let lines: Vec<&str> = source.lines().collect();
        let mut functions = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Newline => {
                    self.bump();
                }
                _ if self.is_keyword("def") => {
                    let start = self.pos;
                    let mut f = self.function()?;
                    let first = self.toks[start].span.line;
                    let last = self.toks[start..self.pos]
                        .iter()
                        .filter(|t| !matches!(t.tok, Tok::Dedent | Tok::Eof))
                        .map(|t| t.span.line)
                        .max()
                        .unwrap_or(first);
                    let last = last.min(lines.len());
                    f.source = lines[first - 1..last].join("\n");
                    functions.push(f);
                }
                _ => return Err(self.unexpected("a function definition (`def`)")),
            }
        }
        Ok(Program { functions })
    }

    fn function(&mut self) -> Result<FunctionDef, DslError> {
        let span = self.span();
        self.expect_keyword("def")?;
        let (name, _) = self.expect_name("a function name")?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        if !self.eat_op(")") {
            loop {
                let (pname, pspan) = self.expect_name("a parameter name")?;
                let ty = if self.eat_op(":") { Some(self.expect_name("a type annotation")?.0) } else { None };
                if params.iter().any(|p: &Param| p.name == pname) {
                    return Err(DslError::syntax(pspan, format!("duplicate parameter `{pname}`")));
                }
                params.push(Param { name: pname, ty });
                if self.eat_op(")") {
                    break;
                }
                self.expect_op(",")?;
                if self.eat_op(")") {
                    break;
                }
            }
        }
        self.expect_op(":")?;
        let body = self.block(0)?;
        Ok(FunctionDef { name, params, body, span, source: String::new() })
    }

    /// `NEWLINE INDENT stmt+ DEDENT`.
    fn block(&mut self, loop_depth: usize) -> Result<Vec<Stmt>, DslError> {
        if !matches!(self.peek(), Tok::Newline) {
            return Err(self.unexpected("a new line after `:`"));
        }
        self.bump();
        if !matches!(self.peek(), Tok::Indent) {
            return Err(self.unexpected("an indented block"));
        }
        self.bump();
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
            if matches!(self.peek(), Tok::Newline) {
                self.bump();
                continue;
            }
            if let Some(stmt) = self.statement(loop_depth)? {
                body.push(stmt);
            }
        }
        if matches!(self.peek(), Tok::Dedent) {
            self.bump();
        }
        Ok(body)
    }

    fn statement(&mut self, loop_depth: usize) -> Result<Option<Stmt>, DslError> {
        let span = self.span();
        let kind = if self.eat_keyword("pass") {
            self.expect_newline()?;
            return Ok(None);
        } else if self.eat_keyword("break") {
            if loop_depth == 0 {
                return Err(DslError::syntax(span, "`break` outside of a loop"));
            }
            self.expect_newline()?;
            StmtKind::Break
        } else if self.eat_keyword("for") {
            let mut vars = vec![self.expect_name("a loop variable")?.0];
            if self.eat_op(",") {
                vars.push(self.expect_name("a second loop variable")?.0);
                if vars[0] == vars[1] {
                    return Err(DslError::syntax(span, format!("loop variable `{}` bound twice", vars[0])));
                }
            }
            self.expect_keyword("in")?;
            let iter = self.expr()?;
            self.expect_op(":")?;
            let body = self.block(loop_depth + 1)?;
            StmtKind::For { vars, iter, body }
        } else if self.eat_keyword("if") {
            return self.if_rest(span, loop_depth).map(Some);
        } else if self.eat_keyword("assert") {
            let cond = self.expr()?;
            let message = if self.eat_op(",") {
                match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.unexpected("an assertion message string")),
                }
            } else {
                "assertion failed".to_string()
            };
            self.expect_newline()?;
            StmtKind::Assert { cond, message }
        } else if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Op("=")) {
            let (name, _) = self.expect_name("a variable name")?;
            self.expect_op("=")?;
            let value = self.expr()?;
            self.expect_newline()?;
            StmtKind::Let { name, value }
        } else if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Op("(")) {
            let (name, nspan) = self.expect_name("an action name")?;
            if Builtin::from_name(&name).is_some() {
                return Err(DslError::syntax(nspan, format!("`{name}` is an expression, not an action")));
            }
            let args = self.call_args()?;
            self.expect_newline()?;
            StmtKind::Call { name, args }
        } else {
            return Err(self.unexpected("a statement"));
        };
        Ok(Some(Stmt { kind, span }))
    }

    fn if_rest(&mut self, span: Span, loop_depth: usize) -> Result<Stmt, DslError> {
        let cond = self.expr()?;
        self.expect_op(":")?;
        let then_body = self.block(loop_depth)?;
        let else_span = self.span();
        let else_body = if self.eat_keyword("elif") {
            vec![self.if_rest(else_span, loop_depth)?]
        } else if self.eat_keyword("else") {
            self.expect_op(":")?;
            self.block(loop_depth)?
        } else {
            Vec::new()
        };
        Ok(Stmt { kind: StmtKind::If { cond, then_body, else_body }, span })
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect_op("(")?;
        let mut args = Vec::new();
        if self.eat_op(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_op(")") {
                return Ok(args);
            }
            self.expect_op(",")?;
            if self.eat_op(")") {
                return Ok(args);
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.and_expr()?;
        while self.is_keyword("or") {
            let span = self.span();
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr { kind: ExprKind::Or(Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.not_expr()?;
        while self.is_keyword("and") {
            let span = self.span();
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr { kind: ExprKind::And(Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        if self.eat_keyword("not") {
            let inner = self.not_expr()?;
            return Ok(Expr { kind: ExprKind::Not(Box::new(inner)), span });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, DslError> {
        let lhs = self.postfix()?;
        let span = self.span();
        if self.eat_op("==") {
            let rhs = self.postfix()?;
            Ok(Expr { kind: ExprKind::Eq(Box::new(lhs), Box::new(rhs)), span })
        } else if self.eat_op("!=") {
            let rhs = self.postfix()?;
            Ok(Expr { kind: ExprKind::Ne(Box::new(lhs), Box::new(rhs)), span })
        } else {
            Ok(lhs)
        }
    }

    fn postfix(&mut self) -> Result<Expr, DslError> {
        let mut e = self.primary()?;
        while self.is_op("[") {
            let span = self.span();
            self.bump();
            let start = if self.is_op(":") { None } else { Some(Box::new(self.expr()?)) };
            if self.eat_op(":") {
                let end = if self.is_op("]") { None } else { Some(Box::new(self.expr()?)) };
                self.expect_op("]")?;
                e = Expr { kind: ExprKind::Slice(Box::new(e), start, end), span };
            } else {
                self.expect_op("]")?;
                let index = start.ok_or_else(|| self.unexpected("an index"))?;
                e = Expr { kind: ExprKind::Index(Box::new(e), index), span };
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Tok::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Tok::Op("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_op(")")?;
                return Ok(inner);
            }
            Tok::Op("[") => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat_op("]") {
                    loop {
                        items.push(self.expr()?);
                        if self.eat_op("]") {
                            break;
                        }
                        self.expect_op(",")?;
                        if self.eat_op("]") {
                            break;
                        }
                    }
                }
                ExprKind::List(items)
            }
            Tok::Ident(s) if s == "True" || s == "False" => {
                self.bump();
                ExprKind::Bool(s == "True")
            }
            Tok::Ident(_) => {
                let (name, _) = self.expect_name("an expression")?;
                if self.is_op("(") {
                    let args = self.call_args()?;
                    match Builtin::from_name(&name) {
                        Some(b) => {
                            let (lo, hi) = b.arity();
                            if args.len() < lo || args.len() > hi {
                                return Err(DslError::syntax(
                                    span,
                                    format!("`{name}` takes {lo}..={hi} argument(s), got {}", args.len()),
                                ));
                            }
                            ExprKind::Builtin(b, args)
                        }
                        None => ExprKind::Query { predicate: name, args },
                    }
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => return Err(self.unexpected("an expression")),
        };
        Ok(Expr { kind, span })
    }
}

/// Parses DSL source into a [`Program`], then checks scoping and recursion.
pub fn parse_program(source: &str) -> Result<Program, DslError> {
    let toks = tokenize(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let program = parser.program(source)?;
    check_program(&program)?;
    Ok(program)
}

fn check_program(program: &Program) -> Result<(), DslError> {
    let mut seen = HashSet::new();
    for f in &program.functions {
        if !seen.insert(f.name.as_str()) {
            return Err(DslError::DuplicateFunction { name: f.name.clone(), span: f.span });
        }
    }
    for f in &program.functions {
        let mut scopes: Vec<HashSet<String>> = vec![f.params.iter().map(|p| p.name.clone()).collect()];
        check_block(&f.body, &mut scopes)?;
    }
    check_recursion(program)
}

fn check_block(body: &[Stmt], scopes: &mut Vec<HashSet<String>>) -> Result<(), DslError> {
    scopes.push(HashSet::new());
    for stmt in body {
        match &stmt.kind {
            StmtKind::Call { args, .. } => args.iter().try_for_each(|a| check_expr(a, scopes))?,
            StmtKind::For { vars, iter, body } => {
                check_expr(iter, scopes)?;
                scopes.push(vars.iter().cloned().collect());
                check_block(body, scopes)?;
                scopes.pop();
            }
            StmtKind::If { cond, then_body, else_body } => {
                check_expr(cond, scopes)?;
                check_block(then_body, scopes)?;
                check_block(else_body, scopes)?;
            }
            StmtKind::Let { name, value } => {
                check_expr(value, scopes)?;
                if !scopes.iter().any(|s| s.contains(name)) {
                    scopes.last_mut().expect("scope pushed above").insert(name.clone());
                }
            }
            StmtKind::Break => {}
            StmtKind::Assert { cond, .. } => check_expr(cond, scopes)?,
        }
    }
    scopes.pop();
    Ok(())
}

fn check_expr(expr: &Expr, scopes: &[HashSet<String>]) -> Result<(), DslError> {
    match &expr.kind {
        ExprKind::Str(_) | ExprKind::Int(_) | ExprKind::Bool(_) => Ok(()),
        ExprKind::Var(name) => {
            if scopes.iter().any(|s| s.contains(name)) {
                Ok(())
            } else {
                Err(DslError::UndefinedVariable { name: name.clone(), span: expr.span })
            }
        }
        ExprKind::List(items) | ExprKind::Builtin(_, items) | ExprKind::Query { args: items, .. } => {
            items.iter().try_for_each(|e| check_expr(e, scopes))
        }
        ExprKind::Index(a, b) | ExprKind::Eq(a, b) | ExprKind::Ne(a, b) | ExprKind::And(a, b) | ExprKind::Or(a, b) => {
            check_expr(a, scopes)?;
            check_expr(b, scopes)
        }
        ExprKind::Slice(a, b, c) => {
            check_expr(a, scopes)?;
            if let Some(b) = b {
                check_expr(b, scopes)?;
            }
            if let Some(c) = c {
                check_expr(c, scopes)?;
            }
            Ok(())
        }
        ExprKind::Not(a) => check_expr(a, scopes),
    }
}

/// Names of defined functions called (directly) from `body`.
pub(crate) fn called_names(body: &[Stmt], out: &mut Vec<(String, Span)>) {
    for stmt in body {
        match &stmt.kind {
            StmtKind::Call { name, .. } => out.push((name.clone(), stmt.span)),
            StmtKind::For { body, .. } => called_names(body, out),
            StmtKind::If { then_body, else_body, .. } => {
                called_names(then_body, out);
                called_names(else_body, out);
            }
            _ => {}
        }
    }
}

fn check_recursion(program: &Program) -> Result<(), DslError> {
    let edges: HashMap<&str, Vec<(String, Span)>> = program
        .functions
        .iter()
        .map(|f| {
            let mut calls = Vec::new();
            called_names(&f.body, &mut calls);
            calls.retain(|(n, _)| program.function(n).is_some());
            (f.name.as_str(), calls)
        })
        .collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        name: &'a str,
        edges: &'a HashMap<&'a str, Vec<(String, Span)>>,
        marks: &mut HashMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Result<(), DslError> {
        match marks.get(name) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => unreachable!("cycles are reported before re-entry"),
            None => {}
        }
        marks.insert(name, Mark::Active);
        path.push(name);
        for (callee, span) in &edges[name] {
            if marks.get(callee.as_str()) == Some(&Mark::Active) {
                let start = path.iter().position(|n| n == callee).expect("active node is on the path");
                let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                cycle.push(callee.clone());
                return Err(DslError::RecursionCycle { cycle, span: *span });
            }
            visit(callee.as_str(), edges, marks, path)?;
        }
        path.pop();
        marks.insert(name, Mark::Done);
        Ok(())
    }

    let mut marks = HashMap::new();
    for f in &program.functions {
        visit(&f.name, &edges, &mut marks, &mut Vec::new())?;
    }
    Ok(())
}

/// A top-level action invocation such as `Stack('b1','b2')` or
/// `construct_stack(['b1','b2','b3'])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub name: String,
    pub args: Vec<Value>,
}

impl std::fmt::Display for Invocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let args: Vec<String> = self.args.iter().map(ToString::to_string).collect();
        write!(f, "{}({})", self.name, args.join(", "))
    }
}

/// Parses a single invocation with literal arguments. Bare identifiers are
/// read as strings, so `Pickup(b1)` and `Pickup('b1')` are equivalent.
pub fn parse_invocation(text: &str) -> Result<Invocation, DslError> {
    let text = text.trim();
    if text.contains('\n') {
        return Err(DslError::syntax(Span::new(1, 1), "an invocation must fit on one line"));
    }
    let toks = tokenize(text)?;
    let mut parser = Parser { toks, pos: 0 };
    let (name, _) = parser.expect_name("an action name")?;
    parser.expect_op("(")?;
    let mut args = Vec::new();
    if !parser.eat_op(")") {
        loop {
            args.push(literal(&mut parser)?);
            if parser.eat_op(")") {
                break;
            }
            parser.expect_op(",")?;
            if parser.eat_op(")") {
                break;
            }
        }
    }
    if !matches!(parser.peek(), Tok::Newline | Tok::Eof) {
        return Err(parser.unexpected("end of invocation"));
    }
    Ok(Invocation { name, args })
}

fn literal(p: &mut Parser) -> Result<Value, DslError> {
    match p.peek().clone() {
        Tok::Str(s) => {
            p.bump();
            Ok(Value::Str(s))
        }
        Tok::Int(n) => {
            p.bump();
            Ok(Value::Int(n))
        }
        Tok::Ident(s) if s == "True" || s == "False" => {
            p.bump();
            Ok(Value::Bool(s == "True"))
        }
        Tok::Ident(s) => {
            p.bump();
            Ok(Value::Str(s))
        }
        Tok::Op("[") | Tok::Op("(") => {
            let close = if p.is_op("[") { "]" } else { ")" };
            p.bump();
            let mut items = Vec::new();
            if !p.eat_op(close) {
                loop {
                    items.push(literal(p)?);
                    if p.eat_op(close) {
                        break;
                    }
                    p.expect_op(",")?;
                    if p.eat_op(close) {
                        break;
                    }
                }
            }
            Ok(Value::List(items))
        }
        _ => Err(p.unexpected("a literal argument")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(src: &str) -> DslError {
        parse_program(src).unwrap_err()
    }

    #[test]
    fn parses_loops_conditionals_and_assignments() {
        let src = "def f(xs: list, target):\n    n = len(xs)\n    for a, b in zip(xs, xs[1:]):\n        if a == target and not clear(b):\n            break\n        elif a != b:\n            Pickup(a)\n        else:\n            pass\n    assert n == 3, 'need three'\n";
        let p = parse_program(src).unwrap();
        let f = p.function("f").unwrap();
        assert_eq!(f.params[0].ty.as_deref(), Some("list"));
        assert_eq!(f.body.len(), 3);
        assert_eq!(f.source.trim_end(), src.trim_end());
    }

    #[test]
    fn rejects_recursion() {
        let e = err("def a(x):\n    b(x)\n\ndef b(x):\n    a(x)\n");
        assert!(matches!(e, DslError::RecursionCycle { .. }), "{e}");
        assert!(matches!(err("def a(x):\n    a(x)\n"), DslError::RecursionCycle { .. }));
    }

    #[test]
    fn rejects_undefined_variables_and_scope_leaks() {
        assert!(matches!(err("def f(x):\n    Pickup(y)\n"), DslError::UndefinedVariable { .. }));
        let leak = "def f(xs):\n    for x in xs:\n        y = x\n    Pickup(y)\n";
        assert!(matches!(err(leak), DslError::UndefinedVariable { .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = err("def f(x):\n    for x in\n");
        assert!(matches!(e, DslError::Syntax { .. }));
        assert_eq!(e.span().unwrap().line, 2);
        assert!(matches!(err("def f(x):\n    break\n"), DslError::Syntax { .. }));
        assert!(matches!(err("def f(x):\n\tPickup(x)\n"), DslError::Syntax { .. }));
        assert!(matches!(err("def f(x):\n    Pickup(x)\ndef f(y):\n    Pickup(y)\n"), DslError::DuplicateFunction { .. }));
    }

    #[test]
    fn invocations() {
        let i = parse_invocation("construct_stack(['b1', 'b2'], b3, 2)").unwrap();
        assert_eq!(i.name, "construct_stack");
        assert_eq!(i.args, vec![Value::strs(["b1", "b2"]), Value::from("b3"), Value::Int(2)]);
        assert_eq!(i.to_string(), "construct_stack(['b1', 'b2'], 'b3', 2)");
        assert_eq!(parse_invocation("Pickup(b1)").unwrap(), parse_invocation("Pickup('b1')").unwrap());
        assert!(parse_invocation("Pickup('b1'").is_err());
        assert!(parse_invocation("Pickup('b1') extra").is_err());
    }
}
