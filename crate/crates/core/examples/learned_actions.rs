//! Runs learned actions written in the action language against a
//! Blockworld instance, first in a private simulation and then as episode
//! steps, and shows what happens when one fails half way.
//!
//!     cargo run --example learned_actions

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use learnact::dsl::{execute, expand, parse_invocation, parse_program, validate_program, SimulatedHost};
use learnact::env::{EpisodeConfig, Environment, StripsEnv};
use learnact::strips::{DomainBundle, WorldState};

const LIBRARY: &str = "\
def dismantle_stack_until(block_list, block_target):
    for top_block, bottom_block in zip(block_list, block_list[1:]):
        if top_block == block_target:
            break
        Unstack(top_block, bottom_block)
        Putdown(top_block)

def construct_stack(block_list):
    for top_block, bottom_block in reverse(zip(block_list, block_list[1:])):
        Pickup(top_block)
        Stack(top_block, bottom_block)

def construct_stack_top_down(block_list):
    for top_block, bottom_block in zip(block_list, block_list[1:]):
        Pickup(top_block)
        Stack(top_block, bottom_block)
";

fn main() -> anyhow::Result<()> {
    let bundle = DomainBundle::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("domains/blockworld"))?;
    let program = parse_program(LIBRARY)?;
    validate_program(&program, &bundle.domain)?;
    let instance = bundle.instance("bw-learned-case").context("missing instance")?.clone();

    println!("== expansion from the initial state");
    let initial = WorldState::from_instance(&bundle.domain, &instance)?;
    let call = parse_invocation("dismantle_stack_until(['b3','b2','b1'],'b1')")?;
    for action in expand(&program, &call, &bundle.domain, &initial)? {
        println!("  {action}");
    }

    println!("== a call that aborts: the buggy variant on three table blocks");
    let mut host = SimulatedHost::new(&bundle.domain, initial.clone());
    execute(&program, &call, &mut host)?;
    let buggy = parse_invocation("construct_stack_top_down(['b1','b2','b3'])")?;
    let trace = execute(&program, &buggy, &mut host)?;
    for entry in &trace.entries {
        println!("  {} {}", entry.invocation(), if entry.valid { "ok" } else { "FAILED" });
    }
    println!("  outcome: {:?}", trace.outcome);

    println!("== the same calls as episode steps");
    let domain = Arc::new(bundle.domain.clone());
    let mut env = StripsEnv::with_library(domain, Arc::new(instance), Arc::new(program), EpisodeConfig::default())?;
    println!("Goal: {}", env.goal_text());
    println!("Observation: {}", env.reset()?.text);
    for step in ["dismantle_stack_until(['b3','b2','b1'],'b1')", "construct_stack(['b1','b2','b3'])"] {
        let result = env.step(step)?;
        println!("Action: {step}\nObservation: {}", result.observation.text);
    }
    let record = env.record();
    println!("reward {}, atomic steps {}/{}", record.reward, record.atomic_ok, record.atomic_total);
    Ok(())
}
