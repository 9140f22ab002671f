//! Every bundled plan fixture solves its instance.

use std::path::Path;
use std::sync::Arc;

use learnact::env::{EpisodeConfig, Environment, StripsEnv};
use learnact::strips::{DomainBundle, DomainDefinition, Instance};

/// Plays `plan` and checks it ends at the goal. Dataset plans must be fully
/// valid; prompt demonstrations may show a refused step.
fn play(domain: &Arc<DomainDefinition>, instance: &Instance, plan: &[String], allow_invalid: bool) -> usize {
    let config = EpisodeConfig { max_steps: plan.len().max(1), max_atomic_steps: plan.len().max(1) };
    let mut env = StripsEnv::new(domain.clone(), Arc::new(instance.clone()), config).unwrap();
    let mut last_done = false;
    let mut refused = 0;
    for (i, step) in plan.iter().enumerate() {
        let r = env.step(step).unwrap_or_else(|e| panic!("{}: step {} `{step}`: {e}", instance.id, i + 1));
        if !r.observation.valid {
            assert!(allow_invalid, "{}: step {} `{step}` invalid: {:?}", instance.id, i + 1, r.message);
            refused += 1;
        }
        last_done = r.observation.done;
    }
    assert!(last_done, "{}: plan ends without reaching the goal", instance.id);
    refused
}

fn check_bundle(name: &str) {
    let bundle = DomainBundle::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("domains").join(name)).unwrap();
    let domain = Arc::new(bundle.domain.clone());
    assert!(bundle.instances.len() >= 4, "{name} needs at least four instances for a split");
    for instance in &bundle.instances {
        let plan = bundle.plans.get(&instance.id).unwrap_or_else(|| panic!("no plan for {}", instance.id));
        play(&domain, instance, plan, false);
    }
    let (example, plan) = bundle.example.as_ref().unwrap_or_else(|| panic!("{name} has no prompt example"));
    assert!(bundle.instance(&example.id).is_none(), "{name}: prompt example is also a dataset instance");
    let refused = play(&domain, example, plan, true);
    assert!(refused >= 1, "{name}: the demonstration should show one refused step");
}

#[test]
fn blockworld_plans_reach_goal() {
    check_bundle("blockworld");
}

#[test]
fn gripper_plans_reach_goal() {
    check_bundle("gripper");
}

#[test]
fn tyreworld_plans_reach_goal() {
    check_bundle("tyreworld");
}

#[test]
fn barman_plans_reach_goal() {
    check_bundle("barman");
}
