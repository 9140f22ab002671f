use crate::dsl::{parse_program, validate_program, Program};
use crate::prompt::extract_code_blocks;
use crate::strips::DomainDefinition;

use super::{for_each_sample, is_transient, ActionLibrary, Candidate, LearnContext, LearnError};

/// Functions from the fenced blocks of a completion. Blocks that do not
/// parse as function definitions (stray call examples, prose) are skipped;
/// what remains must form one valid program with at least one function.
pub(crate) fn parse_functions(text: &str, domain: &DomainDefinition) -> Result<Program, String> {
    let blocks = extract_code_blocks(text);
    if blocks.is_empty() {
        return Err("the reply has no fenced code".into());
    }
    let mut first_error = None;
    let mut kept = Vec::new();
    for block in &blocks {
        match parse_program(block) {
            Ok(p) if !p.functions.is_empty() => kept.push(block.trim_end().to_string()),
            Ok(_) => {}
            Err(e) => {
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    if kept.is_empty() {
        return Err(first_error.unwrap_or_else(|| "the reply defines no function".into()));
    }
    let program = parse_program(&kept.join("\n\n")).map_err(|e| e.to_string())?;
    validate_program(&program, domain).map_err(|e| e.to_string())?;
    Ok(program)
}

/// `name(params)`, taken from the `def` line.
fn signature(source: &str) -> String {
    let line = source.lines().next().unwrap_or("").trim();
    line.trim_start_matches("def").trim().trim_end_matches(':').trim().to_string()
}

/// Asks the learner for a description and a usage example of each named
/// entry. `Ok(Err(_))` means a transient backend failure spoiled the sample.
pub(crate) fn describe(
    ctx: &LearnContext,
    library: &mut ActionLibrary,
    names: &[String],
    seed: u64,
) -> Result<Result<(), String>, LearnError> {
    let ask = |prompt| match ctx.learner.complete(&prompt, Some(seed)) {
        Ok(text) => Ok(Ok(text)),
        Err(e) if is_transient(&e) => Ok(Err(e.to_string())),
        Err(e) => Err(LearnError::from(e)),
    };
    for name in names {
        let Some(index) = library.entries.iter().position(|e| &e.name == name) else { continue };
        let source = library.entries[index].source.clone();
        let description = match ask(ctx.kit.render_description(&ctx.assets, name, &source)?)? {
            Ok(text) => text,
            Err(e) => return Ok(Err(e)),
        };
        let usage = match ask(ctx.kit.render_usage(&ctx.assets, &source)?)? {
            Ok(text) => text,
            Err(e) => return Ok(Err(e)),
        };
        let entry = &mut library.entries[index];
        entry.description = match description.trim() {
            "" => signature(&source),
            text => text.to_string(),
        };
        entry.usage_example = usage.trim().to_string();
    }
    Ok(Ok(()))
}

fn create_sample(ctx: &LearnContext, k: usize) -> Result<Candidate, LearnError> {
    let empty = || ActionLibrary::empty(ctx.domain.name.clone());
    let prompt = ctx.kit.render_creation(&ctx.assets)?;
    let text = match ctx.learner.complete(&prompt, Some(k as u64)) {
        Ok(text) => text,
        Err(e) if is_transient(&e) => return Ok(Candidate::rejected(empty(), format!("creation request failed: {e}"))),
        Err(e) => return Err(e.into()),
    };
    let program = match parse_functions(&text, &ctx.domain) {
        Ok(p) => p,
        Err(e) => return Ok(Candidate::rejected(empty(), format!("unusable creation reply: {e}"))),
    };
    let mut library = ActionLibrary::from_program(ctx.domain.name.clone(), &program);
    let names: Vec<String> = library.names().map(str::to_string).collect();
    if let Err(e) = describe(ctx, &mut library, &names, k as u64)? {
        return Ok(Candidate::rejected(library, format!("description request failed: {e}")));
    }
    Ok(Candidate::accepted(library))
}

/// Draws K candidate libraries from the learner, each with descriptions and
/// usage examples. A sample whose reply holds no usable code becomes a
/// rejected empty library; if every sample is rejected the call fails.
///
/// Sample `k` is requested with seed `k`, so at temperature 0 the samples
/// still reach the backend as distinct requests.
pub fn action_creation(ctx: &LearnContext) -> Result<Vec<Candidate>, LearnError> {
    ctx.config.validate()?;
    let candidates = for_each_sample(ctx.config.parallel, ctx.config.samples, |k| create_sample(ctx, k))?;
    if candidates.iter().all(|c| c.rejected.is_some()) {
        let prompt = ctx.kit.render_creation(&ctx.assets)?;
        let digests = (0..ctx.config.samples)
            .map(|k| prompt.request(&ctx.learner.config).with_seed(Some(k as u64)).digest())
            .collect();
        for c in &candidates {
            log::warn!("creation sample rejected: {}", c.rejected.as_deref().unwrap_or(""));
        }
        return Err(LearnError::CreationFailed { digests });
    }
    Ok(candidates)
}
