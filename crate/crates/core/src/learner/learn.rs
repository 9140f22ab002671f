use crate::dsl::{parse_program, Program};
use crate::prompt::{extract_code_blocks, format_subprocess, parse_improvement, FailureDescription, History, ImproveKind};

use super::create::describe;
use super::{for_each_sample, is_transient, ActionLibrary, Candidate, FailureCase, LearnContext, LearnError};

/// The learning-prompt inputs for `failure`, whose instance has `goal`.
pub fn describe_failure(library: &ActionLibrary, failure: &FailureCase, goal: &str) -> FailureDescription {
    let shown = failure.step.map_or(0, |i| i + 1);
    let history = History::from_record(&failure.record).prefix(shown);
    let entries = match (&failure.sub_trace, failure.step) {
        (Some(trace), _) => trace.entries.as_slice(),
        (None, Some(i)) => failure.record.steps[i].entries.as_slice(),
        (None, None) => &[],
    };
    FailureDescription {
        goal: format!("Goal: {goal}"),
        actions: library.source(),
        function_name: failure.function_name(),
        trajectory: format!("Goal: {goal}\n{}", history.render(0)),
        error_info: failure.error_info(),
        subprocess: format_subprocess(entries),
    }
}

/// Code in an Update's content: its fenced blocks, or the whole text when
/// it has none.
fn update_program(content: &str) -> Result<Program, String> {
    let blocks = extract_code_blocks(content);
    let code = if blocks.is_empty() { content.to_string() } else { blocks.join("\n\n") };
    let program = parse_program(&code).map_err(|e| e.to_string())?;
    if program.functions.is_empty() {
        return Err("the update defines no function".into());
    }
    Ok(program)
}

fn learn_sample(
    ctx: &LearnContext,
    library: &ActionLibrary,
    failure: &FailureCase,
    goal: &str,
    k: usize,
) -> Result<Candidate, LearnError> {
    let mut revised = library.clone();
    revised.version = library.version + 1;
    let prompt = ctx.kit.render_learning(&ctx.assets, &describe_failure(library, failure, goal))?;
    let text = match ctx.learner.complete(&prompt, Some(k as u64)) {
        Ok(text) => text,
        Err(e) if is_transient(&e) => return Ok(Candidate::rejected(revised, format!("learning request failed: {e}"))),
        Err(e) => return Err(e.into()),
    };
    let improvement = match parse_improvement(&text) {
        Ok(imp) => imp,
        Err(e) => {
            log::info!("learning sample {k}: unusable reply ({e}); keeping the library unchanged");
            return Ok(Candidate::accepted(revised));
        }
    };
    match improvement.kind {
        ImproveKind::Update => {
            let program = match update_program(&improvement.content) {
                Ok(p) => p,
                Err(e) => return Ok(Candidate::rejected(revised, format!("update does not parse: {e}")).with(improvement)),
            };
            let changed = revised.apply_update(&program);
            if let Err(e) = revised.validate_sources(&ctx.domain) {
                return Ok(Candidate::rejected(revised, format!("updated library is invalid: {e}")).with(improvement));
            }
            if let Err(e) = describe(ctx, &mut revised, &changed, k as u64)? {
                return Ok(Candidate::rejected(revised, format!("description request failed: {e}")).with(improvement));
            }
        }
        ImproveKind::Plan => {
            let target = [improvement.target.as_str(), failure.function_name().as_str()]
                .into_iter()
                .find_map(|name| revised.entries.iter().position(|e| e.name == name));
            match target {
                Some(i) => revised.entries[i].notes.push(improvement.content.clone()),
                None => log::info!("learning sample {k}: note for unknown action `{}` dropped", improvement.target),
            }
        }
    }
    Ok(Candidate::accepted(revised).with(improvement))
}

/// Draws K revisions of `library` from the learner, given one failure on an
/// instance whose goal is `goal`.
///
/// An Update replaces or adds functions and regenerates their guidance; a
/// Plan (or Note) appends advice to the target's notes without touching any
/// source. A reply without a readable `Improve:` header yields the library
/// unchanged; an Update whose code does not parse or validate is rejected.
pub fn action_learn(
    ctx: &LearnContext,
    library: &ActionLibrary,
    failure: &FailureCase,
    goal: &str,
) -> Result<Vec<Candidate>, LearnError> {
    ctx.config.validate()?;
    for_each_sample(ctx.config.parallel, ctx.config.samples, |k| learn_sample(ctx, library, failure, goal, k))
}
