use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use super::model::{Atom, DomainDefinition, Object};
use super::parse::Instance;

/// Why an action could not be bound to a schema.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("`{action}` takes {expected} argument(s), got {got}")]
    Arity { action: String, expected: usize, got: usize },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("`{object}` is a {actual}, but `{action}` expects a {expected}")]
    TypeMismatch { action: String, object: String, expected: String, actual: String },
    #[error("`{action}` was given `{object}` more than once")]
    RepeatedArgument { action: String, object: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("instance `{instance}` is for domain `{found}`, not `{expected}`")]
    DomainMismatch { instance: String, expected: String, found: String },
    #[error("object `{object}` has undeclared type `{ty}`")]
    UnknownType { object: String, ty: String },
    #[error("invalid atom `{atom}`: {reason}")]
    InvalidAtom { atom: String, reason: String },
    #[error("precondition of `{0}` is not satisfied")]
    PreconditionViolated(String),
}

/// A schema instantiated with concrete objects.
///
/// Carries its instantiated precondition and effect sets so applicability and
/// application need no further access to the domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<Atom>,
    pub pre_neg: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl GroundAction {
    /// Binds `name(args)` against `domain`, checking arity, object existence,
    /// types and argument distinctness.
    pub fn ground(
        domain: &DomainDefinition,
        objects: &[Object],
        name: &str,
        args: &[String],
    ) -> Result<GroundAction, GroundError> {
        let schema = domain.schema(name).ok_or_else(|| GroundError::UnknownAction(name.to_string()))?;
        if schema.arity() != args.len() {
            return Err(GroundError::Arity { action: name.to_string(), expected: schema.arity(), got: args.len() });
        }
        let mut seen = HashSet::new();
        for (arg, param) in args.iter().zip(&schema.params) {
            let obj = objects
                .iter()
                .find(|o| &o.name == arg)
                .ok_or_else(|| GroundError::UnknownObject(arg.clone()))?;
            if !domain.is_subtype(&obj.ty, &param.ty) {
                return Err(GroundError::TypeMismatch {
                    action: name.to_string(),
                    object: arg.clone(),
                    expected: param.ty.clone(),
                    actual: obj.ty.clone(),
                });
            }
            if !seen.insert(arg.as_str()) {
                return Err(GroundError::RepeatedArgument { action: name.to_string(), object: arg.clone() });
            }
        }
        let subst = |atom: &Atom| Atom {
            predicate: atom.predicate.clone(),
            args: atom
                .args
                .iter()
                .map(|a| {
                    let i = schema.params.iter().position(|p| &p.name == a).expect("validated parameter");
                    args[i].clone()
                })
                .collect(),
        };
        Ok(GroundAction {
            name: name.to_string(),
            args: args.to_vec(),
            pre_pos: schema.pre.iter().filter(|l| !l.negated).map(|l| subst(&l.atom)).collect(),
            pre_neg: schema.pre.iter().filter(|l| l.negated).map(|l| subst(&l.atom)).collect(),
            add: schema.add.iter().map(subst).collect(),
            del: schema.del.iter().map(subst).collect(),
        })
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let quoted: Vec<String> = self.args.iter().map(|a| format!("'{a}'")).collect();
        write!(f, "{}({})", self.name, quoted.join(","))
    }
}

/// Ground atoms true in one state, plus the instance's objects and goal.
///
/// Objects and goal are shared between successor states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub objects: Arc<Vec<Object>>,
    pub atoms: BTreeSet<Atom>,
    pub goal: Arc<BTreeSet<Atom>>,
}

impl WorldState {
    /// Validates `instance` against `domain` and returns its initial state.
    pub fn from_instance(domain: &DomainDefinition, instance: &Instance) -> Result<WorldState, StateError> {
        if instance.domain != domain.name {
            return Err(StateError::DomainMismatch {
                instance: instance.id.clone(),
                expected: domain.name.clone(),
                found: instance.domain.clone(),
            });
        }
        for o in &instance.objects {
            if !domain.has_type(&o.ty) {
                return Err(StateError::UnknownType { object: o.name.clone(), ty: o.ty.clone() });
            }
        }
        for atom in instance.init.iter().chain(&instance.goal) {
            check_ground_atom(domain, &instance.objects, atom)?;
        }
        Ok(WorldState {
            objects: Arc::new(instance.objects.clone()),
            atoms: instance.init.clone(),
            goal: Arc::new(instance.goal.clone()),
        })
    }

    pub fn holds(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn applicable(&self, action: &GroundAction) -> bool {
        action.pre_pos.iter().all(|a| self.atoms.contains(a)) && action.pre_neg.iter().all(|a| !self.atoms.contains(a))
    }

    /// Successor state; `self` is left untouched.
    pub fn apply(&self, action: &GroundAction) -> Result<WorldState, StateError> {
        if !self.applicable(action) {
            return Err(StateError::PreconditionViolated(action.to_string()));
        }
        let mut atoms = self.atoms.clone();
        for d in &action.del {
            atoms.remove(d);
        }
        atoms.extend(action.add.iter().cloned());
        Ok(WorldState { objects: Arc::clone(&self.objects), atoms, goal: Arc::clone(&self.goal) })
    }

    pub fn goal_satisfied(&self) -> bool {
        self.goal.is_subset(&self.atoms)
    }

    pub fn object(&self, name: &str) -> Option<&Object> {
        self.objects.iter().find(|o| o.name == name)
    }
}

pub(crate) fn check_ground_atom(domain: &DomainDefinition, objects: &[Object], atom: &Atom) -> Result<(), StateError> {
    let invalid = |reason: String| StateError::InvalidAtom { atom: atom.to_string(), reason };
    let pred = domain
        .predicate(&atom.predicate)
        .ok_or_else(|| invalid(format!("undeclared predicate `{}`", atom.predicate)))?;
    if pred.arity() != atom.args.len() {
        return Err(invalid(format!("expected {} argument(s)", pred.arity())));
    }
    for (arg, ty) in atom.args.iter().zip(&pred.param_types) {
        let obj = objects
            .iter()
            .find(|o| &o.name == arg)
            .ok_or_else(|| invalid(format!("unknown object `{arg}`")))?;
        if !domain.is_subtype(&obj.ty, ty) {
            return Err(invalid(format!("`{arg}` is a {} but a {ty} is required", obj.ty)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strips::{parse_domain, parse_instance};

    fn blocks() -> (DomainDefinition, WorldState) {
        let d = parse_domain(include_str!("../../domains/blockworld/domain.strips")).unwrap();
        let i = parse_instance(include_str!("../../domains/blockworld/prompt/example.inst")).unwrap();
        let s = WorldState::from_instance(&d, &i).unwrap();
        (d, s)
    }

    fn ground(d: &DomainDefinition, s: &WorldState, name: &str, args: &[&str]) -> Result<GroundAction, GroundError> {
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        GroundAction::ground(d, &s.objects, name, &args)
    }

    #[test]
    fn grounding_errors() {
        let (d, s) = blocks();
        assert!(matches!(ground(&d, &s, "Fly", &["b1"]), Err(GroundError::UnknownAction(_))));
        assert!(matches!(ground(&d, &s, "Pickup", &[]), Err(GroundError::Arity { .. })));
        assert!(matches!(ground(&d, &s, "Pickup", &["b9"]), Err(GroundError::UnknownObject(_))));
        assert!(matches!(ground(&d, &s, "Stack", &["b1", "b1"]), Err(GroundError::RepeatedArgument { .. })));
    }

    #[test]
    fn apply_follows_add_and_delete_lists() {
        let (d, s) = blocks();
        let a = ground(&d, &s, "Unstack", &["b2", "b3"]).unwrap();
        assert_eq!(a.to_string(), "Unstack('b2','b3')");
        assert!(s.applicable(&a));
        let next = s.apply(&a).unwrap();
        assert!(next.holds(&Atom::new("holding", ["b2"])));
        assert!(next.holds(&Atom::new("clear", ["b3"])));
        assert!(!next.holds(&Atom::new("on", ["b2", "b3"])));
        assert!(!next.holds(&Atom::new("armempty", Vec::<String>::new())));
    }

    #[test]
    fn inapplicable_action_is_an_error() {
        let (d, s) = blocks();
        let a = ground(&d, &s, "Pickup", &["b3"]).unwrap();
        assert!(!s.applicable(&a));
        assert!(matches!(s.apply(&a), Err(StateError::PreconditionViolated(_))));
    }

    #[test]
    fn instance_for_other_domain_is_rejected() {
        let (d, _) = blocks();
        let i = parse_instance("instance x\ndomain gripper\nobjects\n  b1 - block\ninit\n  clear(b1)\ngoal\n  clear(b1)\n").unwrap();
        assert!(matches!(WorldState::from_instance(&d, &i), Err(StateError::DomainMismatch { .. })));
    }

    #[test]
    fn atoms_must_use_declared_objects() {
        let (d, _) = blocks();
        let i = parse_instance("instance x\ndomain blockworld\nobjects\n  b1 - block\ninit\n  clear(b2)\ngoal\n  clear(b1)\n").unwrap();
        assert!(matches!(WorldState::from_instance(&d, &i), Err(StateError::InvalidAtom { .. })));
    }
}
