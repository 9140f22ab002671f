use super::{DslError, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

const OPS: &[&str] = &["==", "!=", "(", ")", "[", "]", ",", ":", "="];

/// Python-style tokenizer: emits `Newline`, `Indent` and `Dedent` tokens for
/// logical lines and ignores line breaks inside brackets.
pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize;

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;

        if depth == 0 {
            let mut width = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                if chars[i] == '\t' {
                    return Err(DslError::syntax(Span::new(line_no, i + 1), "tabs are not allowed in indentation"));
                }
                width += 1;
                i += 1;
            }
            if i == chars.len() || chars[i] == '#' {
                continue;
            }
            let current = *indents.last().expect("indent stack is never empty");
            if width > current {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, span: Span::new(line_no, 1) });
            } else {
                while width < *indents.last().expect("indent stack is never empty") {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, span: Span::new(line_no, 1) });
                }
                if width != *indents.last().expect("indent stack is never empty") {
                    return Err(DslError::syntax(Span::new(line_no, width + 1), "inconsistent indentation"));
                }
            }
        }

        while i < chars.len() {
            let c = chars[i];
            let span = Span::new(line_no, i + 1);
            if c == ' ' || c == '\t' || c == '\r' {
                i += 1;
            } else if c == '#' {
                break;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span });
            } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n = text.parse().map_err(|_| DslError::syntax(span, format!("integer `{text}` out of range")))?;
                out.push(Token { tok: Tok::Int(n), span });
            } else if c == '\'' || c == '"' {
                let quote = c;
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(DslError::syntax(span, "unterminated string literal")),
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(&e @ ('\\' | '\'' | '"')) => s.push(e),
                                _ => return Err(DslError::syntax(Span::new(line_no, i + 1), "invalid escape sequence")),
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), span });
            } else {
                let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let op = OPS.iter().find(|op| rest.starts_with(**op)).copied();
                match op {
                    Some(op) => {
                        match op {
                            "(" | "[" => depth += 1,
                            ")" | "]" => depth = depth.saturating_sub(1),
                            _ => {}
                        }
                        i += op.len();
                        out.push(Token { tok: Tok::Op(op), span });
                    }
                    None => return Err(DslError::syntax(span, format!("unexpected character `{c}`"))),
                }
            }
        }
        if depth == 0 && !matches!(out.last(), Some(Token { tok: Tok::Newline | Tok::Indent | Tok::Dedent, .. }) | None) {
            out.push(Token { tok: Tok::Newline, span: Span::new(line_no, chars.len() + 1) });
        }
    }

    let end = Span::new(source.lines().count() + 1, 1);
    if depth != 0 {
        return Err(DslError::syntax(end, "unclosed bracket at end of input"));
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { tok: Tok::Dedent, span: end });
    }
    out.push(Token { tok: Tok::Eof, span: end });
    Ok(out)
}
