//! Random legal plays, pointer elision, token-level perturbation and corpora.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::arena::{Arena, MoveRef};
use crate::play::{self, Lang, PointedPlay, Reconstruction, Tracker};
use crate::rng::{self, StreamRng};

/// Dense token ids: the end-of-play marker is 0, move `m` is `m + 1`.
///
/// Since [`MoveRef`] order is `(path, kind)` order, ids follow the
/// lexicographic order of move tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Vocab {
    pub const EOP: u32 = 0;
    /// How the end-of-play marker is written in corpus files.
    pub const EOP_TOKEN: &'static str = "$";

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn move_id(m: MoveRef) -> u32 {
        m.0 + 1
    }

    pub fn move_of(id: u32) -> Option<MoveRef> {
        id.checked_sub(1).map(MoveRef)
    }
}

pub fn build_vocab(arena: &Arena) -> Vocab {
    let tokens: Vec<String> = core::iter::once(Vocab::EOP_TOKEN.to_string())
        .chain(arena.moves().map(|m| arena.token(m)))
        .collect();
    let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    Vocab { tokens, ids }
}

/// A pointer-free play: move token ids followed by exactly one end marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq {
    ids: Vec<u32>,
}

impl TokenSeq {
    /// Wraps move ids (no end marker) and appends the end marker.
    pub fn from_moves(moves: impl IntoIterator<Item = u32>) -> Result<Self, CorpusError> {
        let mut ids: Vec<u32> = moves.into_iter().collect();
        if ids.contains(&Vocab::EOP) {
            return Err(CorpusError::EmbeddedEndMarker);
        }
        ids.push(Vocab::EOP);
        Ok(TokenSeq { ids })
    }

    /// All ids including the trailing end marker.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Move ids without the end marker.
    pub fn moves(&self) -> &[u32] {
        &self.ids[..self.ids.len() - 1]
    }

    /// Number of moves, not counting the end marker.
    pub fn len(&self) -> usize {
        self.ids.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn move_refs(&self) -> impl Iterator<Item = MoveRef> + '_ {
        self.moves().iter().map(|&id| MoveRef(id - 1))
    }

    pub fn render(&self, vocab: &Vocab) -> String {
        let mut out = String::new();
        for (i, &id) in self.ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(vocab.token(id).unwrap_or("?"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("cannot perturb an empty sequence")]
    EmptySequence,
    #[error("perturbation ratio must lie in (0, 1], got {0}")]
    BadRatio(String),
    #[error("end-of-play marker inside a play")]
    EmbeddedEndMarker,
    #[error("no complete play found for play {index} after {attempts} attempts")]
    NoCompletePlay { index: usize, attempts: usize },
    #[error("no illegal perturbation found after {0} attempts")]
    NoIllegalPerturbation(usize),
    #[error("max_len must be at least 1")]
    ZeroLength,
}

/// Shape of generated plays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub max_len: usize,
    /// Chance of stopping at a point where every question is answered.
    pub p_stop: f64,
    /// Keep only plays that end with no pending question.
    pub complete_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_len: 50, p_stop: 0.05, complete_only: false }
    }
}

/// Attempts per play before `complete_only` generation gives up.
pub const COMPLETE_ATTEMPTS: usize = 10_000;

/// Grows a legal play one uniformly chosen legal extension at a time.
pub fn generate_play(arena: &Arena, lang: Lang, max_len: usize, p_stop: f64, rng: &mut StreamRng) -> PointedPlay {
    let mut tracker = Tracker::new(arena);
    while tracker.len() < max_len {
        if !tracker.is_empty() && tracker.pending().is_empty() && rng.gen_bool(p_stop) {
            break;
        }
        let ext = tracker.extensions(lang);
        if ext.is_empty() {
            break;
        }
        let (mv, ptr) = ext[rng.gen_range(0..ext.len())];
        tracker.push(mv, ptr);
    }
    tracker.to_play()
}

/// Drops pointers and names, keeping the moves in order.
pub fn elide(p: &PointedPlay) -> TokenSeq {
    let mut ids: Vec<u32> = p.moves().map(Vocab::move_id).collect();
    ids.push(Vocab::EOP);
    TokenSeq { ids }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    /// Type expression of the arena.
    pub arena: String,
    pub lang: Lang,
    pub seed: u64,
    pub plays: Vec<TokenSeq>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.plays.iter().map(|p| p.ids().len()).sum()
    }

    /// One end marker followed by every play with its own end marker, so each
    /// play is predicted from the end of the previous one.
    pub fn token_stream(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.token_count() + 1);
        out.push(Vocab::EOP);
        for p in &self.plays {
            out.extend_from_slice(p.ids());
        }
        out
    }
}

fn generate_one(arena: &Arena, lang: Lang, cfg: &GenConfig, seed: u64, index: usize) -> Result<PointedPlay, CorpusError> {
    let mut rng = rng::stream(seed, rng::PLAYS, index as u64);
    if !cfg.complete_only {
        return Ok(generate_play(arena, lang, cfg.max_len, cfg.p_stop, &mut rng));
    }
    for _ in 0..COMPLETE_ATTEMPTS {
        let p = generate_play(arena, lang, cfg.max_len, cfg.p_stop, &mut rng);
        if play::pending_questions(arena, &p).is_ok_and(|q| q.is_empty()) {
            return Ok(p);
        }
    }
    Err(CorpusError::NoCompletePlay { index, attempts: COMPLETE_ATTEMPTS })
}

/// Play `index` of the corpus for `seed`; corpora are built from these.
pub fn generate_indexed_play(
    arena: &Arena,
    lang: Lang,
    cfg: &GenConfig,
    seed: u64,
    index: usize,
) -> Result<PointedPlay, CorpusError> {
    if cfg.max_len == 0 {
        return Err(CorpusError::ZeroLength);
    }
    generate_one(arena, lang, cfg, seed, index)
}

/// `count` plays, play `i` drawn from sub-stream `i` of `(seed, "plays")`.
pub fn generate_corpus(arena: &Arena, lang: Lang, count: usize, cfg: &GenConfig, seed: u64) -> Result<Corpus, CorpusError> {
    let plays = (0..count)
        .map(|i| generate_indexed_play(arena, lang, cfg, seed, i).map(|p| elide(&p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus { arena: arena.type_tree().to_string(), lang, seed, plays })
}

/// Edit distance between the move parts of two token sequences.
pub fn levenshtein(a: &TokenSeq, b: &TokenSeq) -> usize {
    edit_distance(a.moves(), b.moves())
}

/// Unit-cost insert/delete/substitute distance, two rows of the DP table.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `max(1, floor(ratio * len))`.
pub fn edit_budget(len: usize, ratio: f64) -> usize {
    // the epsilon keeps e.g. 0.3 * 10 from flooring to 2
    let k = libm::floor(ratio * len as f64 + 1e-9) as usize;
    k.max(1)
}

fn check_ratio(ratio: f64) -> Result<(), CorpusError> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(CorpusError::BadRatio(alloc::format!("{ratio}")))
    }
}

/// Applies `edit_budget(len, ratio)` random single-token edits, each an
/// insertion, deletion or substitution with equal probability. Inserted and
/// substituted tokens are uniform over move ids `1..vocab_size`; the end
/// marker is never touched. Once the body is empty every edit is an insertion.
pub fn perturb(s: &TokenSeq, vocab_size: usize, rng: &mut StreamRng, ratio: f64) -> Result<TokenSeq, CorpusError> {
    check_ratio(ratio)?;
    if s.is_empty() {
        return Err(CorpusError::EmptySequence);
    }
    let mut body = s.moves().to_vec();
    let hi = vocab_size as u32;
    for _ in 0..edit_budget(s.len(), ratio) {
        let kind = rng.gen_range(0..3u8);
        match kind {
            1 if !body.is_empty() => {
                let at = rng.gen_range(0..body.len());
                body.remove(at);
            }
            2 if !body.is_empty() => {
                let at = rng.gen_range(0..body.len());
                body[at] = rng.gen_range(1..hi);
            }
            _ => {
                let at = rng.gen_range(0..=body.len());
                body.insert(at, rng.gen_range(1..hi));
            }
        }
    }
    TokenSeq::from_moves(body)
}

/// Pointer-search budget used when deciding legality of token sequences.
pub const RECONSTRUCT_BUDGET: usize = 1_000_000;

/// Re-rolls [`perturb`] until no pointer assignment makes the result legal.
pub fn perturb_illegal(
    arena: &Arena,
    lang: Lang,
    s: &TokenSeq,
    rng: &mut StreamRng,
    ratio: f64,
    max_tries: usize,
) -> Result<TokenSeq, CorpusError> {
    let vocab_size = arena.move_count() + 1;
    for _ in 0..max_tries {
        let out = perturb(s, vocab_size, rng, ratio)?;
        let moves: Vec<MoveRef> = out.move_refs().collect();
        if let Reconstruction::Illegal(_) = play::reconstruct(arena, lang, &moves, RECONSTRUCT_BUDGET) {
            return Ok(out);
        }
    }
    Err(CorpusError::NoIllegalPerturbation(max_tries))
}

/// Perturbs every play of a corpus, play `i` using sub-stream `i` of
/// `(seed, "perturb")`.
pub fn perturb_corpus(
    arena: &Arena,
    c: &Corpus,
    ratio: f64,
    seed: u64,
    require_illegal: bool,
) -> Result<Corpus, CorpusError> {
    const MAX_TRIES: usize = 1000;
    let vocab_size = arena.move_count() + 1;
    let plays = c
        .plays
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = rng::stream(seed, rng::PERTURB, i as u64);
            if require_illegal {
                perturb_illegal(arena, c.lang, p, &mut r, ratio, MAX_TRIES)
            } else {
                perturb(p, vocab_size, &mut r, ratio)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus { arena: c.arena.clone(), lang: c.lang, seed, plays })
}
