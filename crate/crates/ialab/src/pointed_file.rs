//! Pointed plays as text: one move per line, `token index justifier|*`,
//! plays separated by blank lines. Lines starting with `#` are comments.
//!
//! ```text
//! q@ε 0 *
//! q@1 1 0
//! a@1 2 1
//! ```

use std::fmt::Write as _;

use ialab_core::{Arena, PointedMove, PointedPlay};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PointedFileError {
    #[error("line {line}: unknown token {token:?}")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: expected `token index justifier|*`")]
    Syntax { line: usize },
}

/// A play and the line of each of its moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayAt {
    pub lines: Vec<usize>,
    pub play: PointedPlay,
}

pub fn parse_pointed(arena: &Arena, text: &str) -> Result<Vec<PlayAt>, PointedFileError> {
    let mut out: Vec<PlayAt> = Vec::new();
    let mut current: Option<PlayAt> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.starts_with('#') {
            continue;
        }
        if raw.is_empty() {
            out.extend(current.take());
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let [token, name, justifier] = fields[..] else {
            return Err(PointedFileError::Syntax { line });
        };
        let mv = arena.lookup_token(token).ok_or_else(|| PointedFileError::UnknownToken { line, token: token.to_string() })?;
        let name = name.parse().map_err(|_| PointedFileError::Syntax { line })?;
        let justifier = match justifier {
            "*" => None,
            j => Some(j.parse().map_err(|_| PointedFileError::Syntax { line })?),
        };
        let at = current.get_or_insert_with(|| PlayAt { lines: Vec::new(), play: PointedPlay::default() });
        at.lines.push(line);
        at.play.push(PointedMove { mv, name, justifier });
    }
    out.extend(current);
    Ok(out)
}

pub fn format_pointed(arena: &Arena, plays: &[PointedPlay]) -> String {
    let mut out = String::new();
    for (k, p) in plays.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for m in &p.items {
            let j = m.justifier.map_or_else(|| "*".to_string(), |j| j.to_string());
            let _ = writeln!(out, "{} {} {}", arena.token(m.mv), m.name, j);
        }
    }
    out
}
