//! Text corpus files.
//!
//! ```text
//! #version 1
//! #arena unit -> unit
//! #language seq
//! #seed 7
//! #count 2
//! q@ε a@ε $
//! q@ε q@1 a@1 a@ε $
//! ```
//!
//! One play per line, tokens separated by spaces, `$` for the end marker.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ialab_core::corpus::{build_vocab, Vocab};
use ialab_core::{make_arena, parse_type, Arena, Corpus, Lang, TokenSeq};
use thiserror::Error;

pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: unsupported corpus version {found}, expected {VERSION}")]
    Version { line: usize, found: String },
    #[error("line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("missing header #{0}")]
    MissingHeader(&'static str),
    #[error("line {line}: unknown token {token:?}")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: {message}")]
    Play { line: usize, message: String },
    #[error("header declares {declared} plays, file has {found}")]
    Count { declared: usize, found: usize },
}

/// A parsed corpus with its arena and vocabulary.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub arena: Arena,
    pub vocab: Vocab,
}

pub fn format_corpus(c: &Corpus, vocab: &Vocab) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#version {VERSION}");
    let _ = writeln!(out, "#arena {}", c.arena);
    let _ = writeln!(out, "#language {}", c.lang.short_name());
    let _ = writeln!(out, "#seed {}", c.seed);
    let _ = writeln!(out, "#count {}", c.plays.len());
    for p in &c.plays {
        out.push_str(&p.render(vocab));
        out.push('\n');
    }
    out
}

pub fn write_corpus(c: &Corpus, path: &Path) -> Result<(), CorpusFileError> {
    let arena = make_arena(&parse_type(&c.arena).map_err(|e| CorpusFileError::Header { line: 2, message: e.to_string() })?);
    fs::write(path, format_corpus(c, &build_vocab(&arena)))?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<LoadedCorpus, CorpusFileError> {
    parse_corpus(&fs::read_to_string(path)?)
}

pub fn parse_corpus(text: &str) -> Result<LoadedCorpus, CorpusFileError> {
    let mut version = None;
    let mut arena_text = None;
    let mut lang = None;
    let mut seed = None;
    let mut count = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();

    while let Some(&(line, raw)) = lines.peek() {
        let Some(header) = raw.strip_prefix('#') else { break };
        lines.next();
        let (key, value) = header.split_once(' ').unwrap_or((header, ""));
        let value = value.trim();
        let bad = |message: String| CorpusFileError::Header { line, message };
        match key {
            "version" => {
                if value != VERSION.to_string() {
                    return Err(CorpusFileError::Version { line, found: value.to_string() });
                }
                version = Some(());
            }
            "arena" => {
                let tree = parse_type(value).map_err(|e| bad(format!("bad arena {value:?}: {e}")))?;
                arena_text = Some(tree);
            }
            "language" => lang = Some(Lang::from_short_name(value).ok_or_else(|| bad(format!("unknown language {value:?}")))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(format!("bad seed {value:?}")))?),
            "count" => count = Some(value.parse::<usize>().map_err(|_| bad(format!("bad count {value:?}")))?),
            _ => return Err(bad(format!("unknown header #{key}"))),
        }
    }
    version.ok_or(CorpusFileError::MissingHeader("version"))?;
    let tree = arena_text.ok_or(CorpusFileError::MissingHeader("arena"))?;
    let lang = lang.ok_or(CorpusFileError::MissingHeader("language"))?;
    let seed = seed.ok_or(CorpusFileError::MissingHeader("seed"))?;
    let count = count.ok_or(CorpusFileError::MissingHeader("count"))?;

    let arena = make_arena(&tree);
    let vocab = build_vocab(&arena);
    let mut plays = Vec::with_capacity(count);
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        plays.push(parse_play(&vocab, raw, line)?);
    }
    if plays.len() != count {
        return Err(CorpusFileError::Count { declared: count, found: plays.len() });
    }
    let corpus = Corpus { arena: tree.to_string(), lang, seed, plays };
    Ok(LoadedCorpus { corpus, arena, vocab })
}

fn parse_play(vocab: &Vocab, raw: &str, line: usize) -> Result<TokenSeq, CorpusFileError> {
    let mut ids = Vec::new();
    for token in raw.split_whitespace() {
        let id = vocab.id(token).ok_or_else(|| CorpusFileError::UnknownToken { line, token: token.to_string() })?;
        ids.push(id);
    }
    match ids.split_last() {
        Some((&Vocab::EOP, body)) => TokenSeq::from_moves(body.iter().copied())
            .map_err(|_| CorpusFileError::Play { line, message: format!("{} inside a play", Vocab::EOP_TOKEN) }),
        _ => Err(CorpusFileError::Play { line, message: format!("play must end with {}", Vocab::EOP_TOKEN) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ialab_core::corpus::{generate_corpus, GenConfig};

    #[test]
    fn round_trip() {
        let arena = make_arena(&parse_type("(unit -> unit) -> unit").unwrap());
        let c = generate_corpus(&arena, Lang::Concurrent, 20, &GenConfig::default(), 5).unwrap();
        let text = format_corpus(&c, &build_vocab(&arena));
        let back = parse_corpus(&text).unwrap();
        assert_eq!(back.corpus, c);
        assert_eq!(format_corpus(&back.corpus, &back.vocab), text);
    }

    #[test]
    fn header_and_play_lines() {
        let text = "#version 1\n#arena unit -> unit\n#language seq\n#seed 7\n#count 1\nq@ε q@1 a@1 a@ε $\n";
        let c = parse_corpus(text).unwrap();
        assert_eq!(c.corpus.seed, 7);
        assert_eq!(c.corpus.lang, Lang::Sequential);
        assert_eq!(c.corpus.plays[0].len(), 4);
    }

    #[test]
    fn errors_name_line_and_token() {
        let base = "#version 1\n#arena unit -> unit\n#language seq\n#seed 7\n#count 1\n";
        let e = parse_corpus(&format!("{base}q@ε q@7 $\n")).unwrap_err();
        assert_eq!(e.to_string(), "line 6: unknown token \"q@7\"");
        let e = parse_corpus(&base.replace("#version 1", "#version 2")).unwrap_err();
        assert!(matches!(e, CorpusFileError::Version { line: 1, .. }));
        let e = parse_corpus(&format!("{base}q@ε a@ε\n")).unwrap_err();
        assert!(matches!(e, CorpusFileError::Play { line: 6, .. }));
        let e = parse_corpus(&format!("{base}q@ε $ a@ε $\n")).unwrap_err();
        assert!(matches!(e, CorpusFileError::Play { line: 6, .. }));
        let e = parse_corpus(&format!("{base}q@ε $\nq@ε $\n")).unwrap_err();
        assert!(matches!(e, CorpusFileError::Count { declared: 1, found: 2 }));
        let e = parse_corpus("#version 1\n#arena unit\n").unwrap_err();
        assert!(matches!(e, CorpusFileError::MissingHeader("language")));
    }
}
