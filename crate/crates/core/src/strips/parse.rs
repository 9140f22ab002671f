use std::collections::{BTreeSet, HashSet};

use super::lex::{strip_comment, tokenize, Cursor, Tok};
use super::model::{ActionSchema, Atom, DomainDefinition, Literal, Object, Param, Predicate, TypeDecl, OBJECT_TYPE};
use super::Diagnostic;

#[derive(Debug, Clone)]
struct Located<T> {
    value: T,
    line: usize,
    column: usize,
}

impl<T> Located<T> {
    fn err(&self, message: impl std::fmt::Display) -> Diagnostic {
        Diagnostic::new(self.line, self.column, message)
    }
}

#[derive(Default)]
struct RawSchema {
    name: String,
    params: Vec<Located<Param>>,
    pre: Vec<Located<Literal>>,
    add: Vec<Located<Atom>>,
    del: Vec<Located<Atom>>,
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str, bool)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            None
        } else {
            let indented = line.starts_with(|c: char| c.is_whitespace());
            Some((i + 1, line, indented))
        }
    })
}

/// Parses an atom list: atoms separated by whitespace and/or commas.
fn parse_atoms(cur: &mut Cursor<'_>, allow_negation: bool) -> Result<Vec<Located<Literal>>, Diagnostic> {
    let mut out = Vec::new();
    while !cur.at_end() {
        if cur.eat_punct(',') {
            continue;
        }
        let column = cur.column();
        let negated = cur.eat_punct('!');
        if negated && !allow_negation {
            return Err(Diagnostic::new(cur.line(), column, "negation is only allowed in preconditions"));
        }
        let (predicate, _) = cur.expect_ident("predicate name")?;
        let mut args = Vec::new();
        if cur.eat_punct('(') && !cur.eat_punct(')') {
            loop {
                let (arg, _) = cur.expect_ident("argument")?;
                args.push(arg);
                if cur.eat_punct(')') {
                    break;
                }
                cur.expect_punct(',')?;
            }
        }
        out.push(Located { value: Literal { atom: Atom { predicate, args }, negated }, line: cur.line(), column });
    }
    Ok(out)
}

/// Parses and validates a domain file.
pub fn parse_domain(text: &str) -> Result<DomainDefinition, Diagnostic> {
    let mut name: Option<String> = None;
    let mut types: Vec<Located<TypeDecl>> = Vec::new();
    let mut predicates: Vec<Located<Predicate>> = Vec::new();
    let mut schemas: Vec<Located<RawSchema>> = Vec::new();
    let mut last_line = 0;

    for (line_no, line, indented) in lines(text) {
        last_line = line_no;
        let toks = tokenize(line, line_no)?;
        let mut cur = Cursor::new(&toks, line_no, line.chars().count());
        let (keyword, kw_col) = cur.expect_ident("a keyword")?;

        if indented {
            let schema = match schemas.last_mut() {
                Some(s) => s,
                None => return Err(Diagnostic::new(line_no, kw_col, "indented section outside of an action")),
            };
            cur.expect_punct(':')?;
            match keyword.as_str() {
                "pre" => schema.value.pre.extend(parse_atoms(&mut cur, true)?),
                "add" | "del" => {
                    let atoms = parse_atoms(&mut cur, false)?.into_iter().map(|l| Located {
                        value: l.value.atom,
                        line: l.line,
                        column: l.column,
                    });
                    if keyword == "add" {
                        schema.value.add.extend(atoms);
                    } else {
                        schema.value.del.extend(atoms);
                    }
                }
                other => {
                    return Err(Diagnostic::new(
                        line_no,
                        kw_col,
                        format!("unknown section `{other}`, expected `pre`, `add` or `del`"),
                    ))
                }
            }
            continue;
        }

        match keyword.as_str() {
            "domain" => {
                if name.is_some() {
                    return Err(Diagnostic::new(line_no, kw_col, "domain name declared twice"));
                }
                let (n, _) = cur.expect_ident("domain name")?;
                cur.expect_end()?;
                name = Some(n);
            }
            "type" => {
                let (t, col) = cur.expect_ident("type name")?;
                let parent = if cur.eat_punct('<') { Some(cur.expect_ident("parent type")?.0) } else { None };
                cur.expect_end()?;
                types.push(Located { value: TypeDecl { name: t, parent }, line: line_no, column: col });
            }
            "predicate" => {
                let (p, col) = cur.expect_ident("predicate name")?;
                cur.expect_punct('/')?;
                let arity = match cur.peek() {
                    Some(Tok::Int(n)) => {
                        let n = *n;
                        cur.advance();
                        n
                    }
                    _ => return Err(cur.error("expected predicate arity")),
                };
                let mut param_types = Vec::new();
                while let Some(Tok::Ident(t)) = cur.peek() {
                    param_types.push(t.clone());
                    cur.advance();
                }
                let phrase = match cur.peek() {
                    Some(Tok::Str(s)) => {
                        let s = s.clone();
                        cur.advance();
                        Some(s)
                    }
                    _ => None,
                };
                cur.expect_end()?;
                if param_types.is_empty() {
                    param_types = vec![OBJECT_TYPE.to_string(); arity];
                } else if param_types.len() != arity {
                    return Err(Diagnostic::new(
                        line_no,
                        col,
                        format!("predicate `{p}` declares arity {arity} but lists {} types", param_types.len()),
                    ));
                }
                predicates.push(Located { value: Predicate { name: p, param_types, phrase }, line: line_no, column: col });
            }
            "action" => {
                let (a, col) = cur.expect_ident("action name")?;
                cur.expect_punct('(')?;
                let mut params = Vec::new();
                if !cur.eat_punct(')') {
                    loop {
                        let (pname, pcol) = cur.expect_ident("parameter name")?;
                        cur.expect_punct(':')?;
                        let (ty, _) = cur.expect_ident("parameter type")?;
                        params.push(Located { value: Param { name: pname, ty }, line: line_no, column: pcol });
                        if cur.eat_punct(')') {
                            break;
                        }
                        cur.expect_punct(',')?;
                    }
                }
                cur.expect_end()?;
                schemas.push(Located {
                    value: RawSchema { name: a, params, ..Default::default() },
                    line: line_no,
                    column: col,
                });
            }
            other => {
                return Err(Diagnostic::new(
                    line_no,
                    kw_col,
                    format!("unknown keyword `{other}`, expected `domain`, `type`, `predicate` or `action`"),
                ))
            }
        }
    }

    let name = name.ok_or_else(|| Diagnostic::new(1, 1, "missing `domain <name>` declaration"))?;
    validate(name, types, predicates, schemas, last_line)
}

fn validate(
    name: String,
    types: Vec<Located<TypeDecl>>,
    predicates: Vec<Located<Predicate>>,
    schemas: Vec<Located<RawSchema>>,
    last_line: usize,
) -> Result<DomainDefinition, Diagnostic> {
    let mut seen = HashSet::new();
    for t in &types {
        if t.value.name == OBJECT_TYPE || !seen.insert(t.value.name.clone()) {
            return Err(t.err(format!("duplicate type `{}`", t.value.name)));
        }
    }
    for t in &types {
        if let Some(p) = &t.value.parent {
            if p != OBJECT_TYPE && !seen.contains(p) {
                return Err(t.err(format!("undeclared parent type `{p}`")));
            }
        }
    }
    let mut domain = DomainDefinition {
        name,
        types: types.iter().map(|t| t.value.clone()).collect(),
        predicates: Vec::new(),
        schemas: Vec::new(),
    };
    for t in &types {
        let mut current = t.value.name.as_str();
        let mut steps = 0;
        while let Some(parent) = domain.types.iter().find(|d| d.name == current).and_then(|d| d.parent.as_deref()) {
            steps += 1;
            if steps > types.len() {
                return Err(t.err(format!("type `{}` is part of an inheritance cycle", t.value.name)));
            }
            current = parent;
        }
    }

    let mut seen = HashSet::new();
    for p in &predicates {
        if !seen.insert(p.value.name.clone()) {
            return Err(p.err(format!("duplicate predicate `{}`", p.value.name)));
        }
        if let Some(ty) = p.value.param_types.iter().find(|t| !domain.has_type(t)) {
            return Err(p.err(format!("undeclared type `{ty}` in predicate `{}`", p.value.name)));
        }
    }
    domain.predicates = predicates.into_iter().map(|p| p.value).collect();

    if schemas.is_empty() {
        return Err(Diagnostic::new(last_line.max(1), 1, "domain must declare at least one action"));
    }
    let mut seen = HashSet::new();
    for s in &schemas {
        if !seen.insert(s.value.name.clone()) {
            return Err(s.err(format!("duplicate action `{}`", s.value.name)));
        }
    }
    for s in schemas {
        let schema = validate_schema(&domain, s)?;
        domain.schemas.push(schema);
    }
    Ok(domain)
}

fn validate_schema(domain: &DomainDefinition, raw: Located<RawSchema>) -> Result<ActionSchema, Diagnostic> {
    let schema = &raw.value;
    let mut names = HashSet::new();
    for p in &schema.params {
        if !names.insert(p.value.name.as_str()) {
            return Err(p.err(format!("duplicate parameter `{}` in action `{}`", p.value.name, schema.name)));
        }
        if !domain.has_type(&p.value.ty) {
            return Err(p.err(format!("undeclared type `{}`", p.value.ty)));
        }
    }

    let check_atom = |atom: &Atom, line: usize, column: usize| -> Result<(), Diagnostic> {
        let here = |msg: String| Diagnostic::new(line, column, msg);
        let pred = domain
            .predicate(&atom.predicate)
            .ok_or_else(|| here(format!("undeclared predicate `{}`", atom.predicate)))?;
        if pred.arity() != atom.args.len() {
            return Err(here(format!(
                "arity mismatch: `{}` takes {} argument(s), got {}",
                atom.predicate,
                pred.arity(),
                atom.args.len()
            )));
        }
        for (arg, expected) in atom.args.iter().zip(&pred.param_types) {
            let param = schema
                .params
                .iter()
                .find(|p| &p.value.name == arg)
                .ok_or_else(|| here(format!("unknown parameter `{arg}` in action `{}`", schema.name)))?;
            if !domain.is_subtype(&param.value.ty, expected) {
                return Err(here(format!(
                    "type mismatch: parameter `{arg}` is `{}` but `{}` expects `{expected}`",
                    param.value.ty, atom.predicate
                )));
            }
        }
        Ok(())
    };

    for l in &schema.pre {
        check_atom(&l.value.atom, l.line, l.column)?;
    }
    for a in schema.add.iter().chain(&schema.del) {
        check_atom(&a.value, a.line, a.column)?;
    }
    for a in &schema.add {
        if schema.del.iter().any(|d| d.value == a.value) {
            return Err(a.err(format!("`{}` is both added and deleted", a.value)));
        }
    }
    for p in &schema.params {
        let used = schema
            .pre
            .iter()
            .map(|l| &l.value.atom)
            .chain(schema.add.iter().map(|a| &a.value))
            .chain(schema.del.iter().map(|a| &a.value))
            .any(|atom| atom.args.contains(&p.value.name));
        if !used {
            return Err(p.err(format!("parameter `{}` of action `{}` is never used", p.value.name, schema.name)));
        }
    }

    Ok(ActionSchema {
        name: schema.name.clone(),
        params: schema.params.iter().map(|p| p.value.clone()).collect(),
        pre: schema.pre.iter().map(|l| l.value.clone()).collect(),
        add: schema.add.iter().map(|a| a.value.clone()).collect(),
        del: schema.del.iter().map(|a| a.value.clone()).collect(),
    })
}

/// One planning problem over a domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub domain: String,
    pub objects: Vec<Object>,
    pub init: BTreeSet<Atom>,
    pub goal: BTreeSet<Atom>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objects,
    Init,
    Goal,
}

/// Parses an instance file. Checking it against a domain happens in
/// [`super::WorldState::from_instance`].
pub fn parse_instance(text: &str) -> Result<Instance, Diagnostic> {
    let mut id = None;
    let mut domain = None;
    let mut objects: Vec<Object> = Vec::new();
    let mut init = BTreeSet::new();
    let mut goal = BTreeSet::new();
    let mut section = Section::None;

    for (line_no, line, _) in lines(text) {
        let toks = tokenize(line, line_no)?;
        let mut cur = Cursor::new(&toks, line_no, line.chars().count());
        if let [tok] = toks.as_slice() {
            let next = match &tok.tok {
                Tok::Ident(k) if k == "objects" => Some(Section::Objects),
                Tok::Ident(k) if k == "init" => Some(Section::Init),
                Tok::Ident(k) if k == "goal" => Some(Section::Goal),
                _ => None,
            };
            if let Some(next) = next {
                section = next;
                continue;
            }
        }
        match section {
            Section::None => {
                let (keyword, col) = cur.expect_ident("a keyword")?;
                let (value, _) = cur.expect_ident("a name")?;
                cur.expect_end()?;
                match keyword.as_str() {
                    "instance" => id = Some(value),
                    "domain" => domain = Some(value),
                    other => return Err(Diagnostic::new(line_no, col, format!("unknown keyword `{other}`"))),
                }
            }
            Section::Objects => {
                let mut names = Vec::new();
                while let Some(Tok::Ident(n)) = cur.peek() {
                    names.push(n.clone());
                    cur.advance();
                }
                if names.is_empty() {
                    return Err(cur.error("expected object names"));
                }
                let ty = if cur.eat_punct('-') { cur.expect_ident("object type")?.0 } else { OBJECT_TYPE.to_string() };
                cur.expect_end()?;
                for n in names {
                    if objects.iter().any(|o| o.name == n) {
                        return Err(Diagnostic::new(line_no, 1, format!("duplicate object `{n}`")));
                    }
                    objects.push(Object { name: n, ty: ty.clone() });
                }
            }
            Section::Init | Section::Goal => {
                for l in parse_atoms(&mut cur, false)? {
                    if section == Section::Init {
                        init.insert(l.value.atom);
                    } else {
                        goal.insert(l.value.atom);
                    }
                }
            }
        }
    }
    Ok(Instance {
        id: id.ok_or_else(|| Diagnostic::new(1, 1, "missing `instance <id>` declaration"))?,
        domain: domain.ok_or_else(|| Diagnostic::new(1, 1, "missing `domain <name>` declaration"))?,
        objects,
        init,
        goal,
    })
}

impl Instance {
    /// Canonical text form.
    pub fn to_text(&self) -> String {
        let mut out = format!("instance {}\ndomain {}\nobjects\n", self.id, self.domain);
        let mut by_type: Vec<(&str, Vec<&str>)> = Vec::new();
        for o in &self.objects {
            match by_type.iter_mut().find(|(t, _)| *t == o.ty) {
                Some((_, names)) => names.push(&o.name),
                None => by_type.push((&o.ty, vec![&o.name])),
            }
        }
        for (ty, names) in by_type {
            out.push_str(&format!("  {} - {}\n", names.join(" "), ty));
        }
        let atoms = |set: &BTreeSet<Atom>| set.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        out.push_str(&format!("init\n  {}\ngoal\n  {}\n", atoms(&self.init), atoms(&self.goal)));
        out
    }
}
