//! Game-semantic plays of sequential and concurrent Idealised Algol, and a
//! small LSTM language model over them.
//!
//! The crate is `no_std` with `alloc`. File formats, reporting and the
//! command-line tool live in the `ialab` crate.
#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod arena;
pub mod corpus;
pub mod experiment;
pub mod play;
pub mod rng;
pub mod seqmodel;

pub use arena::{make_arena, parse_type, Arena, MoveId, MoveKind, MoveRef, Player, Polarity, TypeTree};
pub use corpus::{Corpus, TokenSeq, Vocab};
pub use play::{Lang, PointedMove, PointedPlay, Rule, Verdict, Violation};
