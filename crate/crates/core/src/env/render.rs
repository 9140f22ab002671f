//! Natural-language rendering of states and goals.
//!
//! Blocks-world domains get a structural layout: towers listed top-down
//! (ordered by their base block), then the arm status, clear blocks and the
//! held block. Every other domain renders one sentence per true atom from the
//! predicate phrases declared in the domain file, in declaration order. The
//! phrasing for Gripper, Barman and Tyreworld lives in their domain files.

use std::collections::{BTreeMap, BTreeSet};

use crate::strips::{Atom, DomainDefinition, WorldState};

pub const INVALID_ACTION: &str =
    "The action is not valid and therefore takes no effect. Please remember to satisfy the restriction of actions.";
pub const GOAL_SUFFIX: &str = " The goal is satisfied.";

fn sentence(domain: &DomainDefinition, atom: &Atom) -> String {
    let text = match domain.predicate(&atom.predicate) {
        Some(p) => p.phrase_for(&atom.args),
        None => atom.to_string(),
    };
    format!("{text}.")
}

fn is_blocks_domain(domain: &DomainDefinition) -> bool {
    let has = |name: &str, arity: usize| domain.predicate(name).is_some_and(|p| p.arity() == arity);
    has("on", 2) && has("ontable", 1) && has("clear", 1) && has("holding", 1) && has("armempty", 0)
}

/// Deterministic text for the visible state.
pub fn render_state(domain: &DomainDefinition, state: &WorldState) -> String {
    if state.objects.is_empty() && state.atoms.is_empty() {
        return String::new();
    }
    if is_blocks_domain(domain) {
        render_blocks(domain, state)
    } else {
        render_phrases(domain, &state.atoms)
    }
}

fn canonical_order<'a>(domain: &DomainDefinition, atoms: impl IntoIterator<Item = &'a Atom>) -> Vec<&'a Atom> {
    let mut sorted: Vec<&Atom> = atoms.into_iter().collect();
    sorted.sort_by(|a, b| {
        let ia = domain.predicate_index(&a.predicate).unwrap_or(usize::MAX);
        let ib = domain.predicate_index(&b.predicate).unwrap_or(usize::MAX);
        (ia, &a.args).cmp(&(ib, &b.args))
    });
    sorted
}

fn render_phrases(domain: &DomainDefinition, atoms: &BTreeSet<Atom>) -> String {
    canonical_order(domain, atoms).into_iter().map(|a| sentence(domain, a)).collect::<Vec<_>>().join(" ")
}

fn render_blocks(domain: &DomainDefinition, state: &WorldState) -> String {
    let mut sentences = Vec::new();
    let mut covered: BTreeSet<&Atom> = BTreeSet::new();

    // block below -> block on top of it
    let mut above: BTreeMap<&str, &Atom> = BTreeMap::new();
    let mut bases = Vec::new();
    for atom in &state.atoms {
        match atom.predicate.as_str() {
            "on" => {
                above.insert(atom.args[1].as_str(), atom);
            }
            "ontable" => bases.push(atom),
            _ => {}
        }
    }
    for base in bases {
        let mut tower = vec![base];
        let mut current = base.args[0].as_str();
        while let Some(on) = above.get(current) {
            if tower.len() > state.atoms.len() {
                break;
            }
            tower.push(on);
            current = on.args[0].as_str();
        }
        for atom in tower.iter().rev() {
            sentences.push(sentence(domain, atom));
            covered.insert(atom);
        }
    }

    let armempty = Atom::new("armempty", Vec::<String>::new());
    if let Some(a) = state.atoms.get(&armempty) {
        sentences.push(sentence(domain, a));
        covered.insert(a);
    }
    for atom in state.atoms.iter().filter(|a| a.predicate == "clear") {
        sentences.push(sentence(domain, atom));
        covered.insert(atom);
    }
    for atom in state.atoms.iter().filter(|a| a.predicate == "holding") {
        sentences.push(sentence(domain, atom));
        covered.insert(atom);
    }
    // anything the layout could not place (unreachable configurations)
    for atom in canonical_order(domain, state.atoms.iter().filter(|a| !covered.contains(a))) {
        sentences.push(sentence(domain, atom));
    }
    sentences.join(" ")
}

/// `The goal is to satisfy the following conditions: …` line for prompts.
pub fn render_goal(domain: &DomainDefinition, goal: &BTreeSet<Atom>) -> String {
    let parts: Vec<String> = canonical_order(domain, goal)
        .into_iter()
        .map(|a| match domain.predicate(&a.predicate) {
            Some(p) => p.phrase_for(&a.args),
            None => a.to_string(),
        })
        .collect();
    format!("The goal is to satisfy the following conditions: {}.", parts.join(", "))
}

/// Observation text after a valid step.
pub fn render_observation(domain: &DomainDefinition, state: &WorldState) -> String {
    let text = render_state(domain, state);
    if state.goal_satisfied() {
        format!("{text}{GOAL_SUFFIX}").trim_start().to_string()
    } else {
        text
    }
}
