//! Line-oriented protocol text format.

use crate::error::ProtocolError;
use crate::protocol::{Protocol, ProtocolBuilder};

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Strips comments and blank lines, yielding `(line number, tokens)`.
pub(crate) fn logical_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        (!toks.is_empty()).then_some((i + 1, toks))
    })
}

fn syntax(line: usize, message: impl Into<String>) -> ProtocolError {
    ProtocolError::Syntax {
        line,
        message: message.into(),
    }
}

fn ident(line: usize, s: &str) -> Result<(), ProtocolError> {
    if is_ident(s) {
        Ok(())
    } else {
        Err(syntax(line, format!("invalid identifier {s:?}")))
    }
}

/// Parses a protocol document.
pub fn parse_protocol(text: &str) -> Result<Protocol, ProtocolError> {
    let mut lines = logical_lines(text).peekable();
    let name = match lines.next() {
        Some((line, toks)) if toks[0] == "protocol" => {
            if toks.len() != 2 {
                return Err(syntax(line, "expected `protocol <ident>`"));
            }
            ident(line, toks[1])?;
            toks[1].to_string()
        }
        Some((line, _)) => return Err(syntax(line, "expected `protocol <ident>`")),
        None => return Err(ProtocolError::MissingHeader),
    };
    let mut builder: Option<ProtocolBuilder> = None;
    let mut pending = Vec::new();
    for (line, toks) in lines {
        match toks[0] {
            "init" => {
                if builder.is_some() {
                    return Err(ProtocolError::DuplicateInit { line });
                }
                if toks.len() != 2 {
                    return Err(syntax(line, "expected `init <state>`"));
                }
                ident(line, toks[1])?;
                builder = Some(ProtocolBuilder::new(name.clone(), toks[1]));
            }
            "protocol" => return Err(syntax(line, "duplicate protocol header")),
            _ => {
                if toks.len() != 3 {
                    return Err(syntax(line, "expected `<src> <label> <dst>`"));
                }
                pending.push((line, toks));
            }
        }
    }
    let mut builder = builder.ok_or(ProtocolError::MissingInit)?;
    for (line, toks) in pending {
        let (src, label, dst) = (toks[0], toks[1], toks[2]);
        ident(line, src)?;
        ident(line, dst)?;
        let (symbol, msg) = if label == "tau" {
            ("tau", None)
        } else if let Some(m) = label.strip_prefix("!!") {
            ("!!", Some(m))
        } else if let Some(m) = label.strip_prefix('!') {
            ("!", Some(m))
        } else if let Some(m) = label.strip_prefix('?') {
            ("?", Some(m))
        } else {
            return Err(syntax(line, format!("invalid label {label:?}")));
        };
        if let Some(m) = msg {
            ident(line, m)?;
        }
        if !builder.add(src, symbol, msg, dst) {
            return Err(ProtocolError::DuplicateTransition { line });
        }
    }
    builder.finish()
}
