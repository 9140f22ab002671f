use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    Creation,
    Description,
    Usage,
    Learning,
    Agent,
    /// The agent prompt without any learned-action slots.
    Act,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::Creation,
        TemplateId::Description,
        TemplateId::Usage,
        TemplateId::Learning,
        TemplateId::Agent,
        TemplateId::Act,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::Creation => "creation",
            TemplateId::Description => "description",
            TemplateId::Usage => "usage",
            TemplateId::Learning => "learning",
            TemplateId::Agent => "agent",
            TemplateId::Act => "act",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.txt", self.name())
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Replaces code fences in untrusted text so it cannot close or open a
/// fence in the surrounding template.
pub fn escape_fences(text: &str) -> String {
    text.replace("```", "'''")
}

/// Named slot values. Use [`Slots::text`] for anything derived from model
/// output or environment data, [`Slots::raw`] for curated prompt assets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Slots(BTreeMap<String, String>);

impl Slots {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raw(mut self, name: &str, value: impl Into<String>) -> Self {
        self.0.insert(name.to_string(), value.into());
        self
    }

    pub fn text(self, name: &str, value: impl AsRef<str>) -> Self {
        let escaped = escape_fences(value.as_ref());
        self.raw(name, escaped)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    /// Digest over every slot name and value, used for provenance.
    pub fn digest(&self, template: &PromptTemplate) -> String {
        let mut h = Sha256::new();
        h.update(template.id.name().as_bytes());
        h.update([0]);
        h.update(template.body.as_bytes());
        for (k, v) in &self.0 {
            h.update([0]);
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot { name: String, optional: bool },
}

/// A prompt body with `{{slot}}` markers. `{{?slot}}` marks an optional
/// slot: left empty, a line holding nothing but that marker disappears, and
/// so does a blank line after it that would otherwise double a blank line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
    lines: Vec<Vec<Piece>>,
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl PromptTemplate {
    pub fn parse(id: TemplateId, body: &str) -> Result<Self, PromptError> {
        let body = body.strip_suffix('\n').unwrap_or(body).to_string();
        let mut lines = Vec::new();
        for (n, line) in body.split('\n').enumerate() {
            let mut pieces = Vec::new();
            let mut rest = line;
            while let Some(open) = rest.find("{{") {
                let close = rest[open..].find("}}").map(|c| open + c).ok_or_else(|| PromptError::Template {
                    id,
                    message: format!("line {}: unclosed `{{{{`", n + 1),
                })?;
                let inner = &rest[open + 2..close];
                let (name, optional) = match inner.strip_prefix('?') {
                    Some(name) => (name, true),
                    None => (inner, false),
                };
                if !is_slot_name(name) {
                    return Err(PromptError::Template { id, message: format!("line {}: bad slot name `{inner}`", n + 1) });
                }
                if open > 0 {
                    pieces.push(Piece::Text(rest[..open].to_string()));
                }
                pieces.push(Piece::Slot { name: name.to_string(), optional });
                rest = &rest[close + 2..];
            }
            if !rest.is_empty() || pieces.is_empty() {
                pieces.push(Piece::Text(rest.to_string()));
            }
            lines.push(pieces);
        }
        Ok(PromptTemplate { id, body, lines })
    }

    fn slots(&self, optional: bool) -> BTreeSet<&str> {
        self.lines
            .iter()
            .flatten()
            .filter_map(|p| match p {
                Piece::Slot { name, optional: o } if *o == optional => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn required_slots(&self) -> BTreeSet<&str> {
        self.slots(false)
    }

    pub fn optional_slots(&self) -> BTreeSet<&str> {
        self.slots(true)
    }

    /// Fills every marker. Required slots must be present and non-empty.
    pub fn render(&self, slots: &Slots) -> Result<String, PromptError> {
        for name in self.required_slots() {
            if slots.get(name).is_none_or(|v| v.trim().is_empty()) {
                return Err(PromptError::MissingSlot { template: self.id, slot: name.to_string() });
            }
        }
        let mut out: Vec<String> = Vec::new();
        let mut skip_blank = false;
        for line in &self.lines {
            let blank_template_line = matches!(line.as_slice(), [Piece::Text(t)] if t.trim().is_empty());
            if skip_blank && blank_template_line {
                skip_blank = false;
                continue;
            }
            skip_blank = false;
            if let [Piece::Slot { name, optional: true }] = line.as_slice() {
                if slots.get(name).is_none_or(|v| v.is_empty()) {
                    skip_blank = out.last().is_none_or(|l| l.trim().is_empty());
                    continue;
                }
            }
            let mut text = String::new();
            for piece in line {
                match piece {
                    Piece::Text(t) => text.push_str(t),
                    Piece::Slot { name, .. } => text.push_str(slots.get(name).unwrap_or("")),
                }
            }
            let has_empty_optional = line.iter().any(|p| matches!(p, Piece::Slot { name, optional: true } if slots.get(name).is_none_or(str::is_empty)));
            if has_empty_optional {
                text.truncate(text.trim_end().len());
            }
            out.push(text);
        }
        Ok(out.join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(body: &str) -> PromptTemplate {
        PromptTemplate::parse(TemplateId::Agent, body).unwrap()
    }

    #[test]
    fn fills_required_slots() {
        let tpl = t("Hello {{name}}, {{greeting}}!\n");
        assert_eq!(tpl.required_slots().into_iter().collect::<Vec<_>>(), ["greeting", "name"]);
        let out = tpl.render(&Slots::new().raw("name", "b1").raw("greeting", "hi")).unwrap();
        assert_eq!(out, "Hello b1, hi!");
    }

    #[test]
    fn missing_or_empty_required_slot_is_an_error() {
        let tpl = t("{{a}} {{b}}");
        assert!(matches!(tpl.render(&Slots::new().raw("a", "x")), Err(PromptError::MissingSlot { slot, .. }) if slot == "b"));
        assert!(tpl.render(&Slots::new().raw("a", "x").raw("b", "  ")).is_err());
    }

    #[test]
    fn empty_optional_lines_collapse() {
        let tpl = t("intro\n{{?extra}}\n\nexamples\n\n{{?more}}\n\ngoal\n{{?history}}\nAction:");
        let full = tpl.render(&Slots::new().raw("extra", "E").raw("more", "M").raw("history", "H")).unwrap();
        assert_eq!(full, "intro\nE\n\nexamples\n\nM\n\ngoal\nH\nAction:");
        let bare = tpl.render(&Slots::new()).unwrap();
        assert_eq!(bare, "intro\n\nexamples\n\ngoal\nAction:");
    }

    #[test]
    fn inline_optional_slot_trims_trailing_space() {
        let tpl = t("Follow the format. {{?fmt}}");
        assert_eq!(tpl.render(&Slots::new()).unwrap(), "Follow the format.");
        assert_eq!(tpl.render(&Slots::new().raw("fmt", "X")).unwrap(), "Follow the format. X");
    }

    #[test]
    fn slot_values_are_not_re_expanded() {
        let tpl = t("{{a}}");
        assert_eq!(tpl.render(&Slots::new().raw("a", "{{b}}")).unwrap(), "{{b}}");
    }

    #[test]
    fn text_slots_cannot_break_fences() {
        let tpl = t("```dsl\n{{code}}\n```");
        let out = tpl.render(&Slots::new().text("code", "x\n```\ninjected")).unwrap();
        assert_eq!(out.matches("```").count(), 2);
    }

    #[test]
    fn malformed_markers() {
        assert!(PromptTemplate::parse(TemplateId::Act, "{{oops").is_err());
        assert!(PromptTemplate::parse(TemplateId::Act, "{{Bad Name}}").is_err());
    }

    #[test]
    fn digest_tracks_slot_content() {
        let tpl = t("{{a}}");
        let d1 = Slots::new().raw("a", "x").digest(&tpl);
        assert_eq!(d1, Slots::new().raw("a", "x").digest(&tpl));
        assert_ne!(d1, Slots::new().raw("a", "y").digest(&tpl));
    }
}
