use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, LlmError};

type Matcher = Box<dyn Fn(&ChatRequest) -> bool + Send + Sync>;

struct Reply {
    label: String,
    matcher: Option<Matcher>,
    text: String,
}

/// Test backend answering from a queue of canned replies. A reply may carry
/// a predicate the request has to satisfy; a mismatch is an error.
#[derive(Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Reply>>,
}

fn head(request: &ChatRequest) -> String {
    request.last_user().lines().last().unwrap_or("").chars().take(120).collect()
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replies answered in order, with no expectations on the request.
    pub fn from_replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        let backend = Self::new();
        for r in replies {
            backend.push(r);
        }
        backend
    }

    pub fn push(&self, text: impl Into<String>) -> &Self {
        let text = text.into();
        self.queue.lock().unwrap().push_back(Reply { label: text.chars().take(40).collect(), matcher: None, text });
        self
    }

    /// Queues a reply that is only valid for requests satisfying `matcher`.
    pub fn expect(
        &self,
        label: impl Into<String>,
        matcher: impl Fn(&ChatRequest) -> bool + Send + Sync + 'static,
        text: impl Into<String>,
    ) -> &Self {
        self.queue.lock().unwrap().push_back(Reply { label: label.into(), matcher: Some(Box::new(matcher)), text: text.into() });
        self
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut queue = self.queue.lock().unwrap();
        let reply = queue.pop_front().ok_or_else(|| LlmError::ScriptExhausted { prompt_head: head(request) })?;
        if let Some(matcher) = &reply.matcher {
            if !matcher(request) {
                return Err(LlmError::ScriptMismatch { label: reply.label, prompt_head: head(request) });
            }
        }
        Ok(reply.text)
    }
}

/// One canned answer in a [`Script`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptRule {
    pub label: String,
    /// Every string must occur in the last user message.
    pub contains: Vec<String>,
    /// Restricts the rule to agent prompts (ending in `Action:`) whose
    /// current `Goal:` line reads exactly this.
    pub goal: Option<String>,
    /// A fixed reply.
    pub reply: Option<String>,
    /// Agent replies by episode step: the n-th action of the episode.
    pub steps: Vec<String>,
    /// The reply once `steps` are used up.
    pub then: Option<String>,
}

/// A content-addressed test backend: the first rule matching a request
/// answers it. Unlike [`ScriptedBackend`] the answer does not depend on call
/// order, so it serves concurrent and repeated runs alike.
///
/// Scripts are TOML files made of `[[rule]]` tables:
///
/// ```toml
/// [[rule]]
/// label = "creation"
/// contains = ["Please propose several high-level steps"]
/// reply = "```dsl\ndef ...\n```"
///
/// [[rule]]
/// goal = "The goal is to satisfy the following conditions: b1 is on b2."
/// steps = ["Pickup('b1')", "Stack('b1','b2')"]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default, rename = "rule")]
    pub rules: Vec<ScriptRule>,
}

/// The current goal of an agent prompt and how many actions the episode has
/// taken, or `None` when the text is not an agent prompt.
fn agent_turn(text: &str) -> Option<(&str, usize)> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.last().map(|l| l.trim()) != Some("Action:") {
        return None;
    }
    let goal_at = lines.iter().rposition(|l| l.starts_with("Goal: "))?;
    let goal = lines[goal_at]["Goal: ".len()..].trim();
    let mut taken = 0;
    for line in &lines[goal_at + 1..] {
        if let Some(rest) = line.strip_prefix("Action: ") {
            taken += usize::from(!rest.trim().is_empty());
        } else if let Some(n) = line.strip_prefix('(').and_then(|l| l.strip_suffix(" earlier steps omitted)")) {
            taken += n.parse::<usize>().unwrap_or(0);
        }
    }
    Some((goal, taken))
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let script: Script = toml::from_str(text).map_err(|e| LlmError::Config(format!("bad script: {e}")))?;
        for (i, rule) in script.rules.iter().enumerate() {
            let has_steps = !rule.steps.is_empty() || rule.then.is_some();
            if rule.reply.is_some() == has_steps {
                return Err(LlmError::Config(format!("script rule {} needs either `reply` or `steps`", i + 1)));
            }
            if has_steps && rule.goal.is_none() {
                return Err(LlmError::Config(format!("script rule {} has `steps` but no `goal`", i + 1)));
            }
        }
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("cannot read script {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn answer(&self, text: &str) -> Option<Result<String, LlmError>> {
        let turn = agent_turn(text);
        for rule in &self.rules {
            if !rule.contains.iter().all(|c| text.contains(c.as_str())) {
                continue;
            }
            let step = match (&rule.goal, turn) {
                (None, _) => None,
                (Some(goal), Some((current, taken))) if goal.trim() == current => Some(taken),
                (Some(_), _) => continue,
            };
            let reply = match (step, &rule.reply) {
                (_, Some(reply)) => Some(reply.clone()),
                (Some(n), None) => rule.steps.get(n).or(rule.then.as_ref()).cloned(),
                (None, None) => None,
            };
            let label = if rule.label.is_empty() { rule.goal.clone().unwrap_or_default() } else { rule.label.clone() };
            return Some(reply.ok_or(LlmError::ScriptExhausted { prompt_head: format!("rule `{label}` has no step left") }));
        }
        None
    }
}

impl ChatBackend for Script {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.answer(request.last_user())
            .unwrap_or_else(|| Err(LlmError::ScriptMismatch { label: "no rule matches".into(), prompt_head: head(request) }))
    }
}
