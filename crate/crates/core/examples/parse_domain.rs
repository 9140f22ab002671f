//! Loads a domain bundle and prints its action schemas, the initial
//! observation and goal line of every instance, and whether each bundled
//! plan reaches the goal.
//!
//!     cargo run --example parse_domain -- [domain-dir]

use std::path::PathBuf;
use std::sync::Arc;

use learnact::env::{render_goal, EpisodeConfig, Environment, StripsEnv};
use learnact::strips::DomainBundle;

fn main() -> anyhow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("domains/blockworld"));
    let bundle = DomainBundle::load(&dir)?;
    let domain = Arc::new(bundle.domain.clone());

    println!("domain {}", domain.name);
    for schema in &domain.schemas {
        println!("  {}", schema.signature());
    }
    for instance in &bundle.instances {
        let mut env = StripsEnv::new(domain.clone(), Arc::new(instance.clone()), EpisodeConfig::default())?;
        println!("\n[{}]", instance.id);
        println!("Goal: {}", render_goal(&domain, &instance.goal));
        println!("Observation: {}", env.reset()?.text);
        if let Some(plan) = bundle.plans.get(&instance.id) {
            for step in plan {
                env.step(step)?;
            }
            let record = env.record();
            println!("plan: {} step(s), reward {}, {}/{} valid", plan.len(), record.reward, record.atomic_ok, record.atomic_total);
        }
    }
    Ok(())
}
