//! Renders every prompt the pipeline sends for a domain, using its prompt
//! assets and an optional template override directory.
//!
//!     cargo run --example prompts -- [domain-dir] [template-dir]

use std::path::PathBuf;

use learnact::env::render_goal;
use learnact::prompt::{FailureDescription, History, PromptAssets, PromptKit, RenderedPrompt};
use learnact::strips::DomainBundle;

fn show(title: &str, prompt: &RenderedPrompt) {
    println!("==================== {title} ({})", &prompt.digest[..12]);
    for m in &prompt.messages {
        println!("[{:?}]\n{}", m.role, m.content);
    }
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("domains/blockworld"));
    let kit = match args.next() {
        Some(templates) => PromptKit::from_dir(templates)?,
        None => PromptKit::builtin(),
    };
    let bundle = DomainBundle::load(&dir)?;
    let assets = PromptAssets::load(dir.join("prompt"))?;
    let instance = bundle.instances.first().ok_or_else(|| anyhow::anyhow!("no instances in {}", dir.display()))?;
    let goal = render_goal(&bundle.domain, &instance.goal);
    let function = "def noop(x):\n    pass";

    show("creation", &kit.render_creation(&assets)?);
    show("description", &kit.render_description(&assets, "noop", function)?);
    show("usage", &kit.render_usage(&assets, function)?);
    let failure = FailureDescription {
        goal: goal.clone(),
        actions: "noop(x): does nothing.".into(),
        function_name: "noop".into(),
        trajectory: "Action: noop('a')\nObservation: ...".into(),
        error_info: "noop('a') did not change the state.".into(),
        subprocess: String::new(),
    };
    show("learning", &kit.render_learning(&assets, &failure)?);
    show("act", &kit.render_act(&assets, &goal, &History::new("(initial observation)"))?);
    show("agent", &kit.render_agent(&assets, "noop(x): does nothing.", "", &goal, &History::new("(initial observation)"))?);
    Ok(())
}
