//! Justified sequences and their legality in sequential and concurrent IA.
//!
//! A [`PointedPlay`] carries explicit occurrence names. The checkers resolve
//! names to positions once and then work on positions through a [`Tracker`],
//! which keeps pending questions and open child threads incrementally so the
//! same code serves full checks, extension enumeration and generation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::arena::{Arena, MoveKind, MoveRef, Player};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lang {
    Sequential,
    Concurrent,
}

impl Lang {
    pub const ALL: [Lang; 2] = [Lang::Sequential, Lang::Concurrent];

    pub fn short_name(self) -> &'static str {
        match self {
            Lang::Sequential => "seq",
            Lang::Concurrent => "conc",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        match s {
            "seq" | "sequential" => Some(Lang::Sequential),
            "conc" | "concurrent" => Some(Lang::Concurrent),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Lang::Sequential => Lang::Concurrent,
            Lang::Concurrent => Lang::Sequential,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// One occurrence `m n n'`: a move, its own name and the name of its justifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointedMove {
    pub mv: MoveRef,
    pub name: u32,
    pub justifier: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PointedPlay {
    pub items: Vec<PointedMove>,
}

impl PointedPlay {
    pub fn new(items: Vec<PointedMove>) -> Self {
        PointedPlay { items }
    }

    /// Builds a play whose names are the 0-based positions.
    pub fn from_positions(moves: &[(MoveRef, Option<usize>)]) -> Self {
        let items = moves
            .iter()
            .enumerate()
            .map(|(i, &(mv, j))| PointedMove { mv, name: i as u32, justifier: j.map(|j| j as u32) })
            .collect();
        PointedPlay { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn moves(&self) -> impl Iterator<Item = MoveRef> + '_ {
        self.items.iter().map(|p| p.mv)
    }

    pub fn prefix(&self, len: usize) -> PointedPlay {
        PointedPlay { items: self.items[..len].to_vec() }
    }

    pub fn push(&mut self, m: PointedMove) {
        self.items.push(m);
    }

    /// A name not used by any occurrence.
    pub fn fresh_name(&self) -> u32 {
        self.items.iter().map(|p| p.name + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Justification,
    Alternation,
    Bracketing,
    Visibility,
    Fork,
    Join,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Justification => "justification",
            Rule::Alternation => "alternation",
            Rule::Bracketing => "bracketing",
            Rule::Visibility => "visibility",
            Rule::Fork => "fork",
            Rule::Join => "join",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Rule::Justification,
            Rule::Alternation,
            Rule::Bracketing,
            Rule::Visibility,
            Rule::Fork,
            Rule::Join,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Violation {
    pub rule: Rule,
    pub index: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.rule, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Verdict {
    pub violation: Option<Violation>,
}

impl Verdict {
    pub const LEGAL: Verdict = Verdict { violation: None };

    pub fn violated(rule: Rule, index: usize) -> Self {
        Verdict { violation: Some(Violation { rule, index }) }
    }

    pub fn is_legal(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violation {
            None => f.write_str("legal"),
            Some(v) => write!(f, "illegal {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlayError {
    #[error("move at position {index} is not in the arena")]
    UnknownMove { index: usize },
    #[error("malformed justified sequence at position {index}")]
    Malformed { index: usize },
    #[error("play is not legal: {0}")]
    Illegal(Violation),
}

fn check_moves_in_arena(arena: &Arena, s: &PointedPlay) -> Result<(), PlayError> {
    match s.items.iter().position(|p| !arena.contains(p.mv)) {
        Some(index) => Err(PlayError::UnknownMove { index }),
        None => Ok(()),
    }
}

/// Maps names to positions one occurrence at a time.
#[derive(Default)]
struct NameResolver {
    seen: BTreeMap<u32, usize>,
}

impl NameResolver {
    /// Resolves the pointer of the occurrence at `index`; `Err` when its name
    /// is reused or its justifier does not name an earlier occurrence.
    fn resolve(&mut self, index: usize, p: &PointedMove) -> Result<Option<usize>, ()> {
        if self.seen.contains_key(&p.name) {
            return Err(());
        }
        let ptr = match p.justifier {
            None => None,
            Some(n) => Some(*self.seen.get(&n).ok_or(())?),
        };
        self.seen.insert(p.name, index);
        Ok(ptr)
    }
}

fn resolve_all(s: &PointedPlay) -> Result<Vec<(MoveRef, Option<usize>)>, PlayError> {
    let mut names = NameResolver::default();
    s.items
        .iter()
        .enumerate()
        .map(|(i, p)| {
            names
                .resolve(i, p)
                .map(|j| (p.mv, j))
                .map_err(|()| PlayError::Malformed { index: i })
        })
        .collect()
}

/// Incremental legality state over a position-indexed justified sequence.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    arena: &'a Arena,
    moves: Vec<MoveRef>,
    ptrs: Vec<Option<usize>>,
    /// For question positions: the position of the answer that closed it.
    answered_at: Vec<Option<usize>>,
    /// Unanswered questions justified by each position.
    open_children: Vec<u32>,
    /// Unanswered question positions, ascending.
    pending: Vec<usize>,
}

/// Membership masks of the P- and O-views of a tracker's current sequence,
/// computed on first use.
#[derive(Default)]
struct Views {
    p: Option<Vec<bool>>,
    o: Option<Vec<bool>>,
}

impl<'a> Tracker<'a> {
    pub fn new(arena: &'a Arena) -> Self {
        Tracker {
            arena,
            moves: Vec::new(),
            ptrs: Vec::new(),
            answered_at: Vec::new(),
            open_children: Vec::new(),
            pending: Vec::new(),
        }
    }

    pub fn arena(&self) -> &'a Arena {
        self.arena
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[MoveRef] {
        &self.moves
    }

    pub fn pointers(&self) -> &[Option<usize>] {
        &self.ptrs
    }

    /// Positions of unanswered questions in order of occurrence.
    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    pub fn to_play(&self) -> PointedPlay {
        let pairs: Vec<_> = self.moves.iter().copied().zip(self.ptrs.iter().copied()).collect();
        PointedPlay::from_positions(&pairs)
    }

    pub fn push(&mut self, mv: MoveRef, ptr: Option<usize>) {
        let i = self.moves.len();
        self.moves.push(mv);
        self.ptrs.push(ptr);
        self.answered_at.push(None);
        self.open_children.push(0);
        match mv.kind() {
            MoveKind::Question => {
                self.pending.push(i);
                if let Some(j) = ptr {
                    self.open_children[j] += 1;
                }
            }
            MoveKind::Answer => {
                let Some(j) = ptr else { return };
                if self.moves[j].kind() != MoveKind::Question || self.answered_at[j].is_some() {
                    return;
                }
                self.answered_at[j] = Some(i);
                if let Ok(k) = self.pending.binary_search(&j) {
                    self.pending.remove(k);
                }
                if let Some(parent) = self.ptrs[j] {
                    self.open_children[parent] -= 1;
                }
            }
        }
    }

    /// Undoes the most recent [`Tracker::push`].
    pub fn pop(&mut self) {
        let Some(mv) = self.moves.pop() else { return };
        let ptr = self.ptrs.pop().flatten();
        self.answered_at.pop();
        self.open_children.pop();
        let i = self.moves.len();
        match mv.kind() {
            MoveKind::Question => {
                self.pending.pop();
                if let Some(j) = ptr {
                    self.open_children[j] -= 1;
                }
            }
            MoveKind::Answer => {
                let Some(j) = ptr else { return };
                if self.answered_at[j] != Some(i) {
                    return;
                }
                self.answered_at[j] = None;
                let at = self.pending.partition_point(|&p| p < j);
                self.pending.insert(at, j);
                if let Some(parent) = self.ptrs[j] {
                    self.open_children[parent] += 1;
                }
            }
        }
    }

    /// Positions of the P-view of the current sequence, ascending.
    pub fn pview(&self) -> Vec<usize> {
        view_positions(self.arena, &self.moves, &self.ptrs, Player::Proponent)
    }

    /// Positions of the O-view of the current sequence, ascending.
    pub fn oview(&self) -> Vec<usize> {
        view_positions(self.arena, &self.moves, &self.ptrs, Player::Opponent)
    }

    fn view_mask(&self, owner: Player) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for i in view_positions(self.arena, &self.moves, &self.ptrs, owner) {
            mask[i] = true;
        }
        mask
    }

    fn justification_ok(&self, mv: MoveRef, ptr: Option<usize>) -> bool {
        let i = self.len();
        if self.arena.is_initial(mv) {
            return ptr.is_none() && i == 0;
        }
        match ptr {
            Some(j) => j < i && self.arena.enables(self.moves[j], mv),
            None => false,
        }
    }

    fn check_sequential(&self, mv: MoveRef, ptr: Option<usize>, views: &mut Views) -> Option<Rule> {
        let player = self.arena.player(mv);
        let alternates = match self.moves.last() {
            None => player == Player::Opponent,
            Some(&prev) => self.arena.player(prev) != player,
        };
        if !alternates {
            return Some(Rule::Alternation);
        }
        if mv.kind() == MoveKind::Answer && ptr != self.pending.last().copied() {
            return Some(Rule::Bracketing);
        }
        if let Some(j) = ptr {
            let mask = match player {
                Player::Proponent => views.p.get_or_insert_with(|| self.view_mask(Player::Proponent)),
                Player::Opponent => views.o.get_or_insert_with(|| self.view_mask(Player::Opponent)),
            };
            if !mask[j] {
                return Some(Rule::Visibility);
            }
        }
        None
    }

    fn check_concurrent(&self, mv: MoveRef, ptr: Option<usize>) -> Option<Rule> {
        let j = ptr?;
        if self.answered_at[j].is_some() {
            return Some(Rule::Fork);
        }
        if mv.kind() == MoveKind::Answer && self.open_children[j] > 0 {
            return Some(Rule::Join);
        }
        None
    }

    fn check_with(&self, lang: Lang, mv: MoveRef, ptr: Option<usize>, views: &mut Views) -> Option<Rule> {
        if !self.justification_ok(mv, ptr) {
            return Some(Rule::Justification);
        }
        match lang {
            Lang::Sequential => self.check_sequential(mv, ptr, views),
            Lang::Concurrent => self.check_concurrent(mv, ptr),
        }
    }

    /// The first rule that appending `mv` justified by `ptr` breaks, if any.
    /// Assumes the current sequence is itself legal in `lang`.
    pub fn check_next(&self, lang: Lang, mv: MoveRef, ptr: Option<usize>) -> Option<Rule> {
        self.check_with(lang, mv, ptr, &mut Views::default())
    }

    /// Every `(move, justifier position)` whose addition stays legal.
    pub fn extensions(&self, lang: Lang) -> Vec<(MoveRef, Option<usize>)> {
        let mut out = Vec::new();
        self.for_each_candidate(|mv, ptr, views| {
            if self.check_with(lang, mv, ptr, views).is_none() {
                out.push((mv, ptr));
            }
        });
        out
    }

    /// Calls `f` for every justification-respecting candidate, in move order
    /// then justifier order.
    fn for_each_candidate(&self, mut f: impl FnMut(MoveRef, Option<usize>, &mut Views)) {
        let mut views = Views::default();
        for mv in self.arena.moves() {
            match self.arena.enabler(mv) {
                None => f(mv, None, &mut views),
                Some(e) => {
                    for (j, &prev) in self.moves.iter().enumerate() {
                        if prev == e {
                            f(mv, Some(j), &mut views);
                        }
                    }
                }
            }
        }
    }

    /// Justifier candidates for appending `mv`: `⋆` for the initial move, else
    /// every earlier occurrence of its enabler.
    pub fn pointer_candidates(&self, mv: MoveRef) -> Vec<Option<usize>> {
        match self.arena.enabler(mv) {
            None => vec![None],
            Some(e) => (0..self.len()).filter(|&j| self.moves[j] == e).map(Some).collect(),
        }
    }
}

fn view_positions(arena: &Arena, moves: &[MoveRef], ptrs: &[Option<usize>], owner: Player) -> Vec<usize> {
    let mut out = Vec::new();
    let mut end = moves.len();
    while end > 0 {
        let i = end - 1;
        out.push(i);
        if arena.player(moves[i]) == owner {
            end = i;
            continue;
        }
        match ptrs[i] {
            // the P-view restarts at an initial move; O-views never meet one here
            None => break,
            Some(j) => {
                out.push(j);
                end = j;
            }
        }
    }
    out.reverse();
    out
}

fn check_lang(arena: &Arena, lang: Option<Lang>, s: &PointedPlay) -> Result<Verdict, PlayError> {
    check_moves_in_arena(arena, s)?;
    let mut names = NameResolver::default();
    let mut tracker = Tracker::new(arena);
    for (i, p) in s.items.iter().enumerate() {
        let Ok(ptr) = names.resolve(i, p) else {
            return Ok(Verdict::violated(Rule::Justification, i));
        };
        let broken = match lang {
            None => (!tracker.justification_ok(p.mv, ptr)).then_some(Rule::Justification),
            Some(lang) => tracker.check_next(lang, p.mv, ptr),
        };
        if let Some(rule) = broken {
            return Ok(Verdict::violated(rule, i));
        }
        tracker.push(p.mv, ptr);
    }
    Ok(Verdict::LEGAL)
}

/// Names are distinct, every pointer targets an earlier enabling occurrence,
/// and the only initial move opens the play.
pub fn check_justified(arena: &Arena, s: &PointedPlay) -> Result<Verdict, PlayError> {
    check_lang(arena, None, s)
}

/// Justification, then alternation, bracketing and visibility, reporting the
/// earliest offending position.
pub fn check_sequential(arena: &Arena, s: &PointedPlay) -> Result<Verdict, PlayError> {
    check_lang(arena, Some(Lang::Sequential), s)
}

/// Justification, then fork and join.
pub fn check_concurrent(arena: &Arena, s: &PointedPlay) -> Result<Verdict, PlayError> {
    check_lang(arena, Some(Lang::Concurrent), s)
}

pub fn check(arena: &Arena, lang: Lang, s: &PointedPlay) -> Result<Verdict, PlayError> {
    check_lang(arena, Some(lang), s)
}

fn view(arena: &Arena, s: &PointedPlay, owner: Player) -> Result<PointedPlay, PlayError> {
    check_moves_in_arena(arena, s)?;
    let resolved = resolve_all(s)?;
    let (moves, ptrs): (Vec<_>, Vec<_>) = resolved.into_iter().unzip();
    let items = view_positions(arena, &moves, &ptrs, owner).into_iter().map(|i| s.items[i]).collect();
    Ok(PointedPlay { items })
}

/// The proponent view: P-moves extend it, an O-move jumps back to its
/// justifier, and an initial move restarts it.
pub fn pview(arena: &Arena, s: &PointedPlay) -> Result<PointedPlay, PlayError> {
    view(arena, s, Player::Proponent)
}

/// The opponent view, dual to [`pview`].
pub fn oview(arena: &Arena, s: &PointedPlay) -> Result<PointedPlay, PlayError> {
    view(arena, s, Player::Opponent)
}

/// Names of question occurrences not yet answered, in order of occurrence.
pub fn pending_questions(arena: &Arena, s: &PointedPlay) -> Result<Vec<u32>, PlayError> {
    check_moves_in_arena(arena, s)?;
    let mut tracker = Tracker::new(arena);
    for (mv, ptr) in resolve_all(s)? {
        tracker.push(mv, ptr);
    }
    Ok(tracker.pending().iter().map(|&i| s.items[i].name).collect())
}

/// All pointed moves `m` with `s·m` legal in `lang`, each carrying a fresh name.
pub fn legal_extensions(arena: &Arena, lang: Lang, s: &PointedPlay) -> Result<Vec<PointedMove>, PlayError> {
    if let Some(v) = check(arena, lang, s)?.violation {
        return Err(PlayError::Illegal(v));
    }
    let mut tracker = Tracker::new(arena);
    for (mv, ptr) in resolve_all(s)? {
        tracker.push(mv, ptr);
    }
    let name = s.fresh_name();
    Ok(tracker
        .extensions(lang)
        .into_iter()
        .map(|(mv, ptr)| PointedMove { mv, name, justifier: ptr.map(|j| s.items[j].name) })
        .collect())
}

/// Outcome of recovering pointers for a pointer-free move sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reconstruction {
    /// Exactly one pointer assignment is legal.
    Unique(PointedPlay),
    /// At least two assignments are legal, so the sequence is legal but its
    /// pointers are not determined.
    Ambiguous,
    /// No assignment is legal. Reports the furthest position any assignment
    /// reached and the first rule that blocked it there.
    Illegal(Violation),
    /// The search budget ran out before an answer was found.
    Undetermined,
}

impl Reconstruction {
    pub fn is_legal(&self) -> bool {
        matches!(self, Reconstruction::Unique(_) | Reconstruction::Ambiguous)
    }
}

struct Search<'a> {
    lang: Lang,
    moves: &'a [MoveRef],
    tracker: Tracker<'a>,
    found: Vec<Option<usize>>,
    solutions: usize,
    furthest: Option<Violation>,
    budget: usize,
    exhausted: bool,
}

impl Search<'_> {
    fn run(&mut self, i: usize) {
        if self.solutions >= 2 || self.exhausted {
            return;
        }
        if i == self.moves.len() {
            self.solutions += 1;
            if self.solutions == 1 {
                self.found = self.tracker.ptrs.clone();
            }
            return;
        }
        let mv = self.moves[i];
        let mut first_rule = Rule::Justification;
        let mut any = false;
        for (k, ptr) in self.tracker.pointer_candidates(mv).into_iter().enumerate() {
            if self.budget == 0 {
                self.exhausted = true;
                return;
            }
            self.budget -= 1;
            match self.tracker.check_next(self.lang, mv, ptr) {
                Some(rule) => {
                    if k == 0 {
                        first_rule = rule;
                    }
                }
                None => {
                    any = true;
                    self.tracker.push(mv, ptr);
                    self.run(i + 1);
                    self.tracker.pop();
                    if self.solutions >= 2 || self.exhausted {
                        return;
                    }
                }
            }
        }
        if !any && self.furthest.is_none_or(|v| v.index < i) {
            self.furthest = Some(Violation { rule: first_rule, index: i });
        }
    }
}

/// Searches pointer assignments for a move sequence, visiting at most
/// `budget` candidate pointers.
pub fn reconstruct(arena: &Arena, lang: Lang, moves: &[MoveRef], budget: usize) -> Reconstruction {
    if let Some(index) = moves.iter().position(|&m| !arena.contains(m)) {
        return Reconstruction::Illegal(Violation { rule: Rule::Justification, index });
    }
    let mut search = Search {
        lang,
        moves,
        tracker: Tracker::new(arena),
        found: Vec::new(),
        solutions: 0,
        furthest: None,
        budget,
        exhausted: false,
    };
    search.run(0);
    match search.solutions {
        0 if search.exhausted => Reconstruction::Undetermined,
        0 => Reconstruction::Illegal(search.furthest.expect("a failing search records where it stopped")),
        1 if search.exhausted => Reconstruction::Undetermined,
        1 => {
            let pairs: Vec<_> = moves.iter().copied().zip(search.found).collect();
            Reconstruction::Unique(PointedPlay::from_positions(&pairs))
        }
        _ => Reconstruction::Ambiguous,
    }
}
