//! Type signatures and the arenas they denote.
//!
//! Every ground type is `unit`, so a type `A1 -> ... -> Ak -> unit` is a
//! tree whose root has the argument trees as children. Each tree node
//! contributes one question and one answer move; the move at a node is named
//! by its child path from the root (`q@ε`, `a@2.1`, ...).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// A simple type over `unit`, kept as the tree of its argument types.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TypeTree {
    pub args: Vec<TypeTree>,
}

impl TypeTree {
    pub fn unit() -> Self {
        TypeTree { args: Vec::new() }
    }

    /// `args[0] -> args[1] -> ... -> unit`
    pub fn arrow(args: Vec<TypeTree>) -> Self {
        TypeTree { args }
    }

    /// The uniform tree of the given order (height) and width.
    pub fn uniform(order: usize, width: usize) -> Self {
        if order == 0 || width == 0 {
            return TypeTree::unit();
        }
        let child = TypeTree::uniform(order - 1, width);
        TypeTree::arrow(alloc::vec![child; width])
    }

    pub fn node_count(&self) -> usize {
        1 + self.args.iter().map(TypeTree::node_count).sum::<usize>()
    }

    /// Ground type is order 0; `A -> B` has order `max(order(A) + 1, order(B))`.
    pub fn order(&self) -> usize {
        self.args.iter().map(|a| a.order() + 1).max().unwrap_or(0)
    }

    /// Largest number of arguments taken at any node.
    pub fn width(&self) -> usize {
        self.args
            .iter()
            .map(TypeTree::width)
            .chain(core::iter::once(self.args.len()))
            .max()
            .unwrap_or(0)
    }
}

/// Renders back to the `unit -> unit` concrete syntax, parenthesising
/// arguments that are themselves arrows.
impl fmt::Display for TypeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for arg in &self.args {
            if arg.args.is_empty() {
                write!(f, "unit -> ")?;
            } else {
                write!(f, "({}) -> ", arg)?;
            }
        }
        write!(f, "unit")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty type expression")]
    Empty,
    #[error("syntax error at byte {pos}: expected {expected}")]
    Syntax { pos: usize, expected: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok {
    Unit,
    Arrow,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &text[i..];
        match bytes[i] {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            _ if rest.starts_with("->") => {
                out.push((Tok::Arrow, i));
                i += 2;
            }
            _ if rest.starts_with("unit")
                && !rest[4..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') =>
            {
                out.push((Tok::Unit, i));
                i += 4;
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: i,
                    expected: "`unit`, `->`, `(` or `)`",
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.at).map(|t| t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    // T ::= atom ('->' T)?
    fn ty(&mut self) -> Result<TypeTree, ParseError> {
        let lhs = self.atom()?;
        if self.peek() == Some(Tok::Arrow) {
            self.at += 1;
            let mut rhs = self.ty()?;
            rhs.args.insert(0, lhs);
            Ok(rhs)
        } else {
            Ok(lhs)
        }
    }

    fn atom(&mut self) -> Result<TypeTree, ParseError> {
        match self.peek() {
            Some(Tok::Unit) => {
                self.at += 1;
                Ok(TypeTree::unit())
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.ty()?;
                if self.peek() != Some(Tok::RParen) {
                    return Err(ParseError::Syntax { pos: self.pos(), expected: "`)`" });
                }
                self.at += 1;
                Ok(inner)
            }
            _ => Err(ParseError::Syntax { pos: self.pos(), expected: "`unit` or `(`" }),
        }
    }
}

/// Parses `T ::= unit | T -> T | ( T )` with right-associative arrows.
pub fn parse_type(text: &str) -> Result<TypeTree, ParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { toks, at: 0, end: text.len() };
    let tree = p.ty()?;
    if p.at != p.toks.len() {
        return Err(ParseError::Syntax { pos: p.pos(), expected: "`->` or end of input" });
    }
    Ok(tree)
}

impl core::str::FromStr for TypeTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

/// Answers sort before questions so that the derived order on [`MoveId`]
/// is the vocabulary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MoveKind {
    Answer,
    Question,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Player {
    Opponent,
    Proponent,
}

impl Player {
    pub fn other(self) -> Self {
        match self {
            Player::Opponent => Player::Proponent,
            Player::Proponent => Player::Opponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Polarity {
    pub player: Player,
    pub kind: MoveKind,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.player {
            Player::Opponent => 'o',
            Player::Proponent => 'p',
        };
        let k = match self.kind {
            MoveKind::Question => 'q',
            MoveKind::Answer => 'a',
        };
        write!(f, "{p}{k}")
    }
}

/// A move named by its node address (1-based child indices) and kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoveId {
    pub path: Vec<u32>,
    pub kind: MoveKind,
}

impl MoveId {
    pub fn question(path: &[u32]) -> Self {
        MoveId { path: path.to_vec(), kind: MoveKind::Question }
    }

    pub fn answer(path: &[u32]) -> Self {
        MoveId { path: path.to_vec(), kind: MoveKind::Answer }
    }

    /// Parses the `q@2.1` / `a@ε` token form.
    pub fn parse_token(token: &str) -> Option<Self> {
        let (kind, path) = token.split_once('@')?;
        let kind = match kind {
            "q" => MoveKind::Question,
            "a" => MoveKind::Answer,
            _ => return None,
        };
        let path = if path == "ε" {
            Vec::new()
        } else {
            path.split('.')
                .map(|p| p.parse::<u32>().ok().filter(|&n| n > 0))
                .collect::<Option<Vec<_>>>()?
        };
        Some(MoveId { path, kind })
    }
}

impl fmt::Display for MoveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            MoveKind::Question => 'q',
            MoveKind::Answer => 'a',
        };
        write!(f, "{k}@")?;
        if self.path.is_empty() {
            return write!(f, "ε");
        }
        for (i, p) in self.path.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Dense handle on a move of one particular arena.
///
/// Node `n` (preorder) owns `MoveRef(2n)` for its answer and `MoveRef(2n + 1)`
/// for its question, so handles sort in `(path, kind)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoveRef(pub u32);

impl MoveRef {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn node(self) -> usize {
        self.index() / 2
    }

    #[inline]
    pub fn kind(self) -> MoveKind {
        if self.0 % 2 == 1 {
            MoveKind::Question
        } else {
            MoveKind::Answer
        }
    }

    pub fn question_of(node: usize) -> Self {
        MoveRef((2 * node + 1) as u32)
    }

    pub fn answer_of(node: usize) -> Self {
        MoveRef((2 * node) as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    path: Vec<u32>,
    parent: Option<usize>,
    depth: usize,
}

/// Moves, polarities and enabling of the arena denoted by a [`TypeTree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arena {
    tree: TypeTree,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("move {0} is not in the arena")]
pub struct UnknownMove(pub String);

fn collect_nodes(tree: &TypeTree, path: &mut Vec<u32>, parent: Option<usize>, out: &mut Vec<Node>) {
    let me = out.len();
    out.push(Node { path: path.clone(), parent, depth: path.len() });
    for (i, arg) in tree.args.iter().enumerate() {
        path.push(i as u32 + 1);
        collect_nodes(arg, path, Some(me), out);
        path.pop();
    }
}

/// Builds the arena of a type.
///
/// Folding `A => B` over the arguments reverses the player polarity of
/// everything in `A` once per level, so a question at depth `d` belongs to
/// the opponent exactly when `d` is even.
pub fn make_arena(tree: &TypeTree) -> Arena {
    let mut nodes = Vec::with_capacity(tree.node_count());
    collect_nodes(tree, &mut Vec::new(), None, &mut nodes);
    Arena { tree: tree.clone(), nodes }
}

impl Arena {
    pub fn type_tree(&self) -> &TypeTree {
        &self.tree
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn move_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn moves(&self) -> impl Iterator<Item = MoveRef> + '_ {
        (0..self.move_count() as u32).map(MoveRef)
    }

    pub fn contains(&self, m: MoveRef) -> bool {
        m.index() < self.move_count()
    }

    pub fn root_question(&self) -> MoveRef {
        MoveRef::question_of(0)
    }

    pub fn initials(&self) -> [MoveRef; 1] {
        [self.root_question()]
    }

    pub fn is_initial(&self, m: MoveRef) -> bool {
        m == self.root_question()
    }

    pub fn depth(&self, m: MoveRef) -> usize {
        self.nodes[m.node()].depth
    }

    pub fn polarity(&self, m: MoveRef) -> Polarity {
        let even = self.depth(m).is_multiple_of(2);
        let question_player = if even { Player::Opponent } else { Player::Proponent };
        let player = match m.kind() {
            MoveKind::Question => question_player,
            MoveKind::Answer => question_player.other(),
        };
        Polarity { player, kind: m.kind() }
    }

    #[inline]
    pub fn player(&self, m: MoveRef) -> Player {
        self.polarity(m).player
    }

    /// The unique enabler of `m`, or `None` for the initial move.
    pub fn enabler(&self, m: MoveRef) -> Option<MoveRef> {
        match m.kind() {
            MoveKind::Answer => Some(MoveRef::question_of(m.node())),
            MoveKind::Question => self.nodes[m.node()].parent.map(MoveRef::question_of),
        }
    }

    pub fn enables(&self, justifier: MoveRef, m: MoveRef) -> bool {
        self.enabler(m) == Some(justifier)
    }

    pub fn move_id(&self, m: MoveRef) -> MoveId {
        MoveId { path: self.nodes[m.node()].path.clone(), kind: m.kind() }
    }

    pub fn lookup(&self, id: &MoveId) -> Option<MoveRef> {
        // nodes are in preorder, which is lexicographic path order
        let node = self
            .nodes
            .binary_search_by(|n| n.path.as_slice().cmp(id.path.as_slice()))
            .ok()?;
        Some(match id.kind {
            MoveKind::Question => MoveRef::question_of(node),
            MoveKind::Answer => MoveRef::answer_of(node),
        })
    }

    pub fn lookup_token(&self, token: &str) -> Option<MoveRef> {
        MoveId::parse_token(token).and_then(|id| self.lookup(&id))
    }

    pub fn token(&self, m: MoveRef) -> String {
        use alloc::string::ToString;
        self.move_id(m).to_string()
    }

    pub fn order(&self) -> usize {
        self.tree.order()
    }

    pub fn width(&self) -> usize {
        self.tree.width()
    }

    /// The unique enabler of a move named by path, as in [`Arena::enabler`].
    pub fn enabler_of(&self, id: &MoveId) -> Result<Option<MoveId>, UnknownMove> {
        use alloc::string::ToString;
        let m = self.lookup(id).ok_or_else(|| UnknownMove(id.to_string()))?;
        Ok(self.enabler(m).map(|e| self.move_id(e)))
    }
}

/// One move per line: `token polarity enabler`, `-` for the initial move.
impl fmt::Display for Arena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in self.moves() {
            write!(f, "{} {} ", self.move_id(m), self.polarity(m))?;
            match self.enabler(m) {
                Some(e) => writeln!(f, "{}", self.move_id(e))?,
                None => writeln!(f, "-")?,
            }
        }
        Ok(())
    }
}

pub fn arena_order(tree: &TypeTree) -> usize {
    tree.order()
}

pub fn arena_width(tree: &TypeTree) -> usize {
    tree.width()
}

/// The boolean arena `{q, t, f}` with `q ⊢ t` and `q ⊢ f`.
///
/// Only unit-based arenas are built from types; this fixed arena exists for
/// tests of the arena laws on a non-unit ground type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolMove {
    Question,
    True,
    False,
}

impl BoolMove {
    pub const ALL: [BoolMove; 3] = [BoolMove::Question, BoolMove::True, BoolMove::False];

    pub fn polarity(self) -> Polarity {
        match self {
            BoolMove::Question => Polarity { player: Player::Opponent, kind: MoveKind::Question },
            BoolMove::True | BoolMove::False => {
                Polarity { player: Player::Proponent, kind: MoveKind::Answer }
            }
        }
    }

    pub fn enabler(self) -> Option<BoolMove> {
        match self {
            BoolMove::Question => None,
            BoolMove::True | BoolMove::False => Some(BoolMove::Question),
        }
    }
}
