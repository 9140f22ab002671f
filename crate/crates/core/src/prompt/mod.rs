//! Prompt templates and the data that fills them.
//!
//! Templates are plain text with `{{slot}}` markers (see [`PromptTemplate`]).
//! The built-in set lives in `templates/` and can be replaced file by file
//! with [`PromptKit::from_dir`]. Per-domain material (system prompt, task
//! instruction, the in-context Act example) comes from a domain's `prompt/`
//! directory via [`PromptAssets::load`].

mod format;
mod response;
mod template;

pub use format::{estimate_tokens, format_subprocess, History};
pub use response::{extract_code_blocks, parse_agent_action, parse_improvement, ImproveKind, Improvement};
pub use template::{escape_fences, PromptTemplate, Slots, TemplateId};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::llm::{BackendConfig, ChatRequest, Message};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("template `{template}` needs a value for `{slot}`")]
    MissingSlot { template: TemplateId, slot: String },
    #[error("template `{id}`: {message}")]
    Template { id: TemplateId, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

/// A filled template as chat messages, with a digest of what went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template: TemplateId,
    pub messages: Vec<Message>,
    pub digest: String,
}

impl RenderedPrompt {
    pub fn user_text(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }

    pub fn request(&self, backend: &BackendConfig) -> ChatRequest {
        backend.request(self.messages.clone())
    }
}

const BUILTIN: [(TemplateId, &str); 6] = [
    (TemplateId::Creation, include_str!("../../templates/creation.txt")),
    (TemplateId::Description, include_str!("../../templates/description.txt")),
    (TemplateId::Usage, include_str!("../../templates/usage.txt")),
    (TemplateId::Learning, include_str!("../../templates/learning.txt")),
    (TemplateId::Agent, include_str!("../../templates/agent.txt")),
    (TemplateId::Act, include_str!("../../templates/act.txt")),
];
const GRAMMAR: &str = include_str!("../../templates/grammar.txt");
const CREATED_EXAMPLE: &str = include_str!("../../templates/examples/created_example.txt");
const DESCRIPTION_EXAMPLES: &str = include_str!("../../templates/examples/description_examples.txt");
const USAGE_EXAMPLES: &str = include_str!("../../templates/examples/usage_examples.txt");
const FORMAT_INSTRUCTION: &str = include_str!("../../templates/examples/format_instruction.txt");
const LEARNING_EXAMPLES: &str = include_str!("../../templates/examples/learning_examples.txt");

fn read(path: &Path) -> Result<String, PromptError> {
    std::fs::read_to_string(path).map_err(|source| PromptError::Io { path: path.to_path_buf(), source })
}

fn read_optional(path: &Path) -> Result<Option<String>, PromptError> {
    if path.is_file() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

fn trim_newlines(s: &str) -> String {
    s.trim_end_matches('\n').to_string()
}

/// Domain-specific prompt material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAssets {
    pub system: String,
    pub instruction: String,
    /// A worked Act-format episode shown to the agent.
    pub act_example: String,
    /// A few atomic invocations, showing the call syntax.
    pub action_example: String,
    pub created_example: String,
    pub description_examples: String,
    pub usage_examples: String,
    pub format_instruction: String,
    pub learning_examples: String,
}

impl PromptAssets {
    /// Reads `system.txt`, `instruction.txt`, `act_example.txt` and
    /// `action_example.txt` from `dir`. The in-context examples for the
    /// learning prompts fall back to the built-in ones unless the directory
    /// provides its own file of the same name.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let required = |name: &str| read(&dir.join(name)).map(|s| trim_newlines(&s));
        let optional = |name: &str, default: &str| {
            read_optional(&dir.join(name)).map(|s| trim_newlines(s.as_deref().unwrap_or(default)))
        };
        Ok(PromptAssets {
            system: required("system.txt")?,
            instruction: required("instruction.txt")?,
            act_example: required("act_example.txt")?,
            action_example: required("action_example.txt")?,
            created_example: optional("created_example.txt", CREATED_EXAMPLE)?,
            description_examples: optional("description_examples.txt", DESCRIPTION_EXAMPLES)?,
            usage_examples: optional("usage_examples.txt", USAGE_EXAMPLES)?,
            format_instruction: optional("format_instruction.txt", FORMAT_INSTRUCTION)?,
            learning_examples: optional("learning_examples.txt", LEARNING_EXAMPLES)?,
        })
    }
}

/// When and how far to shorten agent histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistoryBudget {
    /// Estimated prompt size above which the oldest steps are dropped.
    pub max_prompt_tokens: Option<usize>,
    /// Steps that are always kept.
    pub keep_last: usize,
}

impl Default for HistoryBudget {
    fn default() -> Self {
        HistoryBudget { max_prompt_tokens: None, keep_last: 4 }
    }
}

/// Inputs of the action-learning prompt that describe one failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureDescription {
    pub goal: String,
    /// Sources of the whole current library.
    pub actions: String,
    pub function_name: String,
    /// `Goal:` line plus the Act-style history up to the failing call.
    pub trajectory: String,
    pub error_info: String,
    /// The failing call's atomic steps, see [`format_subprocess`].
    pub subprocess: String,
}

/// The loaded template set.
#[derive(Debug, Clone)]
pub struct PromptKit {
    templates: BTreeMap<TemplateId, PromptTemplate>,
    grammar: String,
    pub history: HistoryBudget,
}

impl PromptKit {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(id, body)| (*id, PromptTemplate::parse(*id, body).expect("built-in templates are well formed")))
            .collect();
        PromptKit { templates, grammar: trim_newlines(GRAMMAR), history: HistoryBudget::default() }
    }

    /// The built-in set with any `<id>.txt` or `grammar.txt` found in `dir`
    /// taking precedence.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut kit = Self::builtin();
        for id in TemplateId::ALL {
            if let Some(body) = read_optional(&dir.join(id.file_name()))? {
                kit.templates.insert(id, PromptTemplate::parse(id, &body)?);
            }
        }
        if let Some(grammar) = read_optional(&dir.join("grammar.txt"))? {
            kit.grammar = trim_newlines(&grammar);
        }
        Ok(kit)
    }

    pub fn with_history_budget(mut self, budget: HistoryBudget) -> Self {
        self.history = budget;
        self
    }

    pub fn template(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn grammar(&self) -> &str {
        &self.grammar
    }

    fn render(&self, id: TemplateId, system: &str, slots: Slots) -> Result<RenderedPrompt, PromptError> {
        let template = self.template(id);
        let body = template.render(&slots)?;
        let digest = slots.raw("__system", system).digest(template);
        Ok(RenderedPrompt { template: id, messages: vec![Message::system(system), Message::user(body)], digest })
    }

    pub fn render_creation(&self, assets: &PromptAssets) -> Result<RenderedPrompt, PromptError> {
        let slots = Slots::new()
            .raw("instruction", &assets.instruction)
            .raw("action_example", &assets.action_example)
            .raw("grammar", &self.grammar)
            .raw("created_example", &assets.created_example);
        self.render(TemplateId::Creation, &assets.system, slots)
    }

    pub fn render_description(
        &self,
        assets: &PromptAssets,
        func_name: &str,
        function: &str,
    ) -> Result<RenderedPrompt, PromptError> {
        let slots = Slots::new()
            .raw("instruction", &assets.instruction)
            .raw("description_examples", &assets.description_examples)
            .text("func_name", func_name)
            .text("function", function);
        self.render(TemplateId::Description, &assets.system, slots)
    }

    pub fn render_usage(&self, assets: &PromptAssets, function: &str) -> Result<RenderedPrompt, PromptError> {
        let slots = Slots::new()
            .raw("instruction", &assets.instruction)
            .raw("format_instruction", &assets.format_instruction)
            .raw("usage_examples", &assets.usage_examples)
            .text("function", function);
        self.render(TemplateId::Usage, &assets.system, slots)
    }

    pub fn render_learning(&self, assets: &PromptAssets, failure: &FailureDescription) -> Result<RenderedPrompt, PromptError> {
        let slots = Slots::new()
            .raw("instruction", &assets.instruction)
            .text("goal", &failure.goal)
            .raw("action_example", &assets.action_example)
            .raw("grammar", &self.grammar)
            .raw("learning_examples", &assets.learning_examples)
            .text("actions", &failure.actions)
            .text("function_name", &failure.function_name)
            .text("trajectory", &failure.trajectory)
            .text("error_info", &failure.error_info)
            .text("subprocess", &failure.subprocess);
        self.render(TemplateId::Learning, &assets.system, slots)
    }

    /// The agent prompt. With empty `learned_instructions` and
    /// `usage_examples` it is identical to [`PromptKit::render_act`].
    pub fn render_agent(
        &self,
        assets: &PromptAssets,
        learned_instructions: &str,
        usage_examples: &str,
        goal: &str,
        history: &History,
    ) -> Result<RenderedPrompt, PromptError> {
        let slots = Slots::new()
            .raw("instruction", &assets.instruction)
            .text("learned_instructions", learned_instructions)
            .raw("act_example", &assets.act_example)
            .text("usage_examples", usage_examples)
            .text("goal", format!("Goal: {goal}"));
        self.render_with_history(TemplateId::Agent, &assets.system, slots, history)
    }

    /// The plain Act prompt with no learned actions.
    pub fn render_act(&self, assets: &PromptAssets, goal: &str, history: &History) -> Result<RenderedPrompt, PromptError> {
        let slots = Slots::new()
            .raw("instruction", &assets.instruction)
            .raw("act_example", &assets.act_example)
            .text("goal", format!("Goal: {goal}"));
        self.render_with_history(TemplateId::Act, &assets.system, slots, history)
    }

    fn render_with_history(
        &self,
        id: TemplateId,
        system: &str,
        slots: Slots,
        history: &History,
    ) -> Result<RenderedPrompt, PromptError> {
        let mut skip = 0;
        loop {
            let prompt = self.render(id, system, slots.clone().text("history", history.render(skip)))?;
            let over = self
                .history
                .max_prompt_tokens
                .is_some_and(|max| estimate_tokens(system) + estimate_tokens(prompt.user_text()) > max);
            if !over || history.steps.len() - skip <= self.history.keep_last {
                return Ok(prompt);
            }
            skip += 1;
        }
    }
}

impl Default for PromptKit {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> PromptAssets {
        PromptAssets::load(concat!(env!("CARGO_MANIFEST_DIR"), "/domains/blockworld/prompt")).unwrap()
    }

    fn history(n: usize) -> History {
        let mut h = History::new("b1 is on the table.");
        for i in 0..n {
            h.push(format!("Pickup('b{i}')"), format!("obs {i}"));
        }
        h
    }

    #[test]
    fn empty_library_agent_prompt_is_the_act_prompt() {
        let kit = PromptKit::builtin();
        let goal = "The goal is to satisfy the following conditions: b1 is on b2.";
        let agent = kit.render_agent(&blocks(), "", "", goal, &history(2)).unwrap();
        let act = kit.render_act(&blocks(), goal, &history(2)).unwrap();
        assert_eq!(agent.user_text(), act.user_text());
        assert!(agent.user_text().ends_with("\nAction:"));
        assert!(agent.user_text().contains(&blocks().act_example));
    }

    #[test]
    fn history_pairs_before_final_action() {
        let kit = PromptKit::builtin();
        let p = kit.render_agent(&blocks(), "lib", "usage", "g", &history(3)).unwrap();
        let tail = p.user_text().split("Goal: g\n").nth(1).unwrap();
        assert_eq!(tail.lines().filter(|l| l.starts_with("Action: ")).count(), 3);
        assert_eq!(tail.lines().filter(|l| l.starts_with("Observation: ")).count(), 4);
        assert_eq!(tail.lines().last(), Some("Action:"));
    }

    #[test]
    fn agent_prompt_is_deterministic() {
        let kit = PromptKit::builtin();
        let a = kit.render_agent(&blocks(), "x", "y", "g", &history(2)).unwrap();
        let b = kit.render_agent(&blocks(), "x", "y", "g", &history(2)).unwrap();
        assert_eq!(a, b);
        let c = kit.render_agent(&blocks(), "x", "y", "g", &history(3)).unwrap();
        assert_ne!(a.digest, c.digest);
    }

    #[test]
    fn long_histories_are_truncated_to_budget() {
        let budget = HistoryBudget { max_prompt_tokens: Some(1000), keep_last: 2 };
        let kit = PromptKit::builtin().with_history_budget(budget);
        let p = kit.render_act(&blocks(), "g", &history(200)).unwrap();
        assert!(p.user_text().contains("earlier steps omitted"));
        assert!(p.user_text().contains("Pickup('b199')"));
        assert!(!p.user_text().contains("Pickup('b0')\n"));
        let unlimited = PromptKit::builtin().render_act(&blocks(), "g", &history(200)).unwrap();
        assert!(unlimited.user_text().contains("Action: Pickup('b0')"));
    }

    #[test]
    fn creation_prompt_requires_its_seed_example() {
        let kit = PromptKit::builtin();
        let mut assets = blocks();
        let p = kit.render_creation(&assets).unwrap();
        assert!(p.user_text().contains("encompassing multiple (at least two) basic actions"));
        assert!(p.user_text().ends_with("Now please write your solution:"));
        assert_eq!(p.digest, kit.render_creation(&assets).unwrap().digest);
        assets.created_example.clear();
        assert!(matches!(kit.render_creation(&assets), Err(PromptError::MissingSlot { .. })));
    }

    #[test]
    fn learning_prompt_ends_awaiting_reason() {
        let kit = PromptKit::builtin();
        let failure = FailureDescription {
            goal: "The goal is to satisfy the following conditions: b1 is on b2.".into(),
            actions: "def f(b):\n    Pickup(b)\n    Putdown(b)".into(),
            function_name: "f".into(),
            trajectory: "Goal: g\nObservation: o\nAction: f('b1')\nObservation: bad".into(),
            error_info: "precondition-failed".into(),
            subprocess: format_subprocess(&[]),
        };
        let p = kit.render_learning(&blocks(), &failure).unwrap();
        assert!(p.user_text().ends_with("Failed reason:"));
        assert!(p.user_text().contains("But an error is observed in the last call (precondition-failed)."));
        assert!(p.user_text().contains("(no atomic steps executed)"));
    }

    #[test]
    fn templates_can_be_overridden_from_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("act.txt"), "{{instruction}}\n{{goal}}\n{{?history}}\nAction:\n").unwrap();
        let kit = PromptKit::from_dir(dir.path()).unwrap();
        let p = kit.render_act(&blocks(), "g", &History::new("o")).unwrap();
        assert!(p.user_text().ends_with("Goal: g\nObservation: o\nAction:"));
        assert_eq!(kit.template(TemplateId::Agent), PromptKit::builtin().template(TemplateId::Agent));
    }
}
