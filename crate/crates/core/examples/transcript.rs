//! Plays a plan file against an instance and prints the Act-style
//! transcript, ending with reward and step accuracy.
//!
//!     cargo run --example transcript -- [domain-dir] [instance-id] [plan-file]
//!
//! Without an instance id it plays the domain's prompt demonstration.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use learnact::env::{step_accuracy, EpisodeConfig, Environment, StepCounting, StripsEnv};
use learnact::strips::{parse_plan, DomainBundle};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("domains/blockworld"));
    let bundle = DomainBundle::load(&dir)?;
    let (instance, bundled_plan) = match args.next() {
        Some(id) => {
            let instance = bundle.instance(&id).ok_or_else(|| anyhow!("no instance `{id}` in {}", dir.display()))?;
            (instance.clone(), bundle.plans.get(&id).cloned())
        }
        None => {
            let (instance, plan) = bundle.example.clone().ok_or_else(|| anyhow!("{} has no prompt example", dir.display()))?;
            (instance, Some(plan))
        }
    };
    let plan = match args.next() {
        Some(path) => parse_plan(&std::fs::read_to_string(&path).with_context(|| path.clone())?),
        None => bundled_plan.ok_or_else(|| anyhow!("no plan for `{}`", instance.id))?,
    };

    let config = EpisodeConfig { max_steps: plan.len().max(1), ..EpisodeConfig::default() };
    let mut env = StripsEnv::new(Arc::new(bundle.domain.clone()), Arc::new(instance), config)?;
    println!("Goal: {}", env.goal_text());
    println!("Observation: {}", env.reset()?.text);
    for step in &plan {
        let result = env.step(step)?;
        println!("Action: {step}");
        println!("Observation: {}", result.observation.text);
    }
    let record = env.record();
    eprintln!(
        "reward {}  step accuracy {}/{} = {:.3}",
        record.reward,
        record.atomic_ok,
        record.atomic_total,
        step_accuracy(record, StepCounting::Atomic)
    );
    Ok(())
}
