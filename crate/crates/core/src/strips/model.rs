use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Root of the type hierarchy. Always present, never declared.
pub const OBJECT_TYPE: &str = "object";

/// A predicate applied to arguments. In schemas the arguments are parameter
/// names; in states and goals they are object names.
///
/// Ordering is `(predicate, args)` lexicographic, which is the canonical
/// order used for state storage and rendering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            f.write_str(&self.predicate)
        } else {
            write!(f, "{}({})", self.predicate, self.args.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        self.atom.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub param_types: Vec<String>,
    /// Sentence template with `{0}`, `{1}`… placeholders, used by renderers.
    pub phrase: Option<String>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.param_types.len()
    }

    /// Fills the phrase template, falling back to the atom's own notation.
    pub fn phrase_for(&self, args: &[String]) -> String {
        match &self.phrase {
            Some(template) => {
                let mut out = template.clone();
                for (i, arg) in args.iter().enumerate() {
                    out = out.replace(&format!("{{{i}}}"), arg);
                }
                out
            }
            None => Atom::new(self.name.clone(), args.iter().cloned()).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub pre: Vec<Literal>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl ActionSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// `Name(p1, p2)` as shown to agents.
    pub fn signature(&self) -> String {
        let names: Vec<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        format!("{}({})", self.name, names.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Object {
    pub name: String,
    pub ty: String,
}

/// A parsed and validated domain. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDefinition {
    pub name: String,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<Predicate>,
    pub schemas: Vec<ActionSchema>,
}

impl DomainDefinition {
    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.schemas.iter().find(|s| s.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == OBJECT_TYPE || self.types.iter().any(|t| t.name == name)
    }

    /// Whether `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        if ancestor == OBJECT_TYPE || ty == ancestor {
            return true;
        }
        let parents: BTreeMap<&str, Option<&str>> =
            self.types.iter().map(|t| (t.name.as_str(), t.parent.as_deref())).collect();
        let mut current = ty;
        // declared hierarchies are acyclic, but bound the walk anyway
        for _ in 0..=self.types.len() {
            match parents.get(current).copied().flatten() {
                Some(p) if p == ancestor => return true,
                Some(p) => current = p,
                None => return false,
            }
        }
        false
    }
}

impl fmt::Display for DomainDefinition {
    /// Canonical text form; reparses to an equal definition.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain {}", self.name)?;
        for t in &self.types {
            match &t.parent {
                Some(p) => writeln!(f, "type {} < {}", t.name, p)?,
                None => writeln!(f, "type {}", t.name)?,
            }
        }
        for p in &self.predicates {
            write!(f, "predicate {}/{}", p.name, p.arity())?;
            for ty in &p.param_types {
                write!(f, " {ty}")?;
            }
            if let Some(phrase) = &p.phrase {
                write!(f, " \"{}\"", phrase.replace('\\', "\\\\").replace('"', "\\\""))?;
            }
            writeln!(f)?;
        }
        for s in &self.schemas {
            let params: Vec<String> = s.params.iter().map(|p| format!("{}:{}", p.name, p.ty)).collect();
            writeln!(f, "action {}({})", s.name, params.join(", "))?;
            let join = |items: Vec<String>| items.join(" ");
            if !s.pre.is_empty() {
                writeln!(f, "  pre: {}", join(s.pre.iter().map(ToString::to_string).collect()))?;
            }
            if !s.add.is_empty() {
                writeln!(f, "  add: {}", join(s.add.iter().map(ToString::to_string).collect()))?;
            }
            if !s.del.is_empty() {
                writeln!(f, "  del: {}", join(s.del.iter().map(ToString::to_string).collect()))?;
            }
        }
        Ok(())
    }
}
