//! Reading model completions back into structured values.

use serde::{Deserialize, Serialize};

/// Bodies of fenced code blocks, in order. The language tag after the
/// opening fence is ignored.
pub fn extract_code_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        match current.as_mut() {
            None if trimmed.starts_with("```") => current = Some(Vec::new()),
            None => {}
            Some(_) if trimmed.starts_with("```") => {
                let body = current.take().unwrap_or_default().join("\n");
                blocks.push(body);
            }
            Some(lines) => lines.push(line),
        }
    }
    blocks
}

/// The action an agent completion asks for: the payload of the first
/// `Action:` line, or else the first non-empty line. Surrounding backticks
/// are dropped.
pub fn parse_agent_action(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let picked = lines
        .iter()
        .find_map(|l| l.strip_prefix("Action:").map(str::trim).filter(|p| !p.is_empty()))
        .or_else(|| lines.first().copied())
        .unwrap_or("");
    picked.trim_matches('`').trim().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImproveKind {
    Update,
    /// Advice without code changes. `Note` is accepted as a synonym.
    Plan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Improvement {
    pub reason: String,
    pub kind: ImproveKind,
    /// The label as written by the model, e.g. `Plan` or `Note`.
    pub label: String,
    pub target: String,
    pub content: String,
    pub test_case: Option<String>,
}

fn header<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let line = line.trim_start().trim_start_matches(['*', '#', ' ']);
    let (head, rest) = line.split_once(':')?;
    head.trim_end_matches('*').trim().eq_ignore_ascii_case(name).then(|| rest.trim_start_matches('*').trim())
}

/// Parses a reply in the `Failed reason / Improve / Content / Test case`
/// layout. The completion may or may not repeat the `Failed reason:` label,
/// since the prompt already ends with it.
pub fn parse_improvement(text: &str) -> Result<Improvement, String> {
    #[derive(PartialEq)]
    enum Section {
        Reason,
        Content,
        Test,
        Other,
    }
    let mut section = Section::Reason;
    let (mut reason, mut content, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut improve: Option<String> = None;
    for line in text.lines() {
        if let Some(rest) = header(line, "Failed reason") {
            section = Section::Reason;
            reason.push(rest);
        } else if let Some(rest) = header(line, "Improve") {
            improve = Some(rest.to_string());
            section = Section::Other;
        } else if let Some(rest) = header(line, "Content") {
            section = Section::Content;
            content.push(rest);
        } else if let Some(rest) = header(line, "Test case") {
            section = Section::Test;
            test.push(rest);
        } else {
            match section {
                Section::Reason => reason.push(line),
                Section::Content => content.push(line),
                Section::Test => test.push(line),
                Section::Other => {}
            }
        }
    }
    let improve = improve.ok_or("reply has no `Improve:` line")?;
    let improve = improve.trim_matches(|c: char| c == '<' || c == '>' || c.is_whitespace());
    let (label, target) = match improve.split_once(':') {
        Some((l, t)) => (l.trim(), t.trim()),
        None => {
            let mut parts = improve.splitn(2, char::is_whitespace);
            (parts.next().unwrap_or("").trim(), parts.next().unwrap_or("").trim())
        }
    };
    let kind = match label.to_ascii_lowercase().as_str() {
        "update" => ImproveKind::Update,
        "plan" | "note" => ImproveKind::Plan,
        other => return Err(format!("unknown improvement `{other}`, expected Update or Plan")),
    };
    let target = target.trim_matches(|c: char| c == '[' || c == ']' || c == '`' || c.is_whitespace());
    let target = target.split('(').next().unwrap_or("").trim().to_string();
    let join = |v: Vec<&str>| v.join("\n").trim().to_string();
    let content = join(content);
    if content.is_empty() {
        return Err("reply has an empty `Content:` section".into());
    }
    let test_case = Some(join(test)).filter(|t| !t.is_empty());
    Ok(Improvement { reason: join(reason), kind, label: label.to_string(), target, content, test_case })
}
