use std::sync::Arc;

use crate::dsl::Program;
use crate::env::{EpisodeConfig, EpisodeEnd, EpisodeRecord, Environment, StripsEnv};
use crate::prompt::{parse_agent_action, History, PromptAssets, PromptKit};
use crate::strips::{DomainDefinition, Instance};

use super::{is_transient, ActionLibrary, LearnError, Model};

/// Runs the agent on one instance until the goal holds or a budget runs
/// out. `program` must be the parsed form of `library`.
///
/// A transient backend failure ends the episode with reward 0 and the error
/// in the record; other backend errors abort.
#[allow(clippy::too_many_arguments)]
pub fn solve_problem(
    kit: &PromptKit,
    assets: &PromptAssets,
    agent: &Model,
    domain: Arc<DomainDefinition>,
    instance: Arc<Instance>,
    library: &ActionLibrary,
    program: Arc<Program>,
    episode: EpisodeConfig,
    seed: Option<u64>,
) -> Result<EpisodeRecord, LearnError> {
    let mut env = StripsEnv::with_library(domain, instance, program, episode)?;
    let goal = env.goal_text();
    let instructions = library.instructions_text();
    let usage = library.usage_text();
    while env.is_active() && env.record().steps.len() < episode.max_steps {
        let history = History::from_record(env.record());
        let prompt = kit.render_agent(assets, &instructions, &usage, &goal, &history)?;
        let completion = match agent.complete(&prompt, seed) {
            Ok(text) => text,
            Err(e) if is_transient(&e) => {
                log::warn!("agent failed on {}: {e}", env.instance().id);
                let mut record = env.into_record();
                record.end = Some(EpisodeEnd::AgentError);
                record.error = Some(e.to_string());
                return Ok(record);
            }
            Err(e) => return Err(e.into()),
        };
        env.step(&parse_agent_action(&completion))?;
    }
    let mut record = env.into_record();
    if record.end.is_none() {
        record.end = Some(EpisodeEnd::StepBudget);
    }
    Ok(record)
}
