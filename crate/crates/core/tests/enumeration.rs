//! Exhaustive checks over every justified sequence of small arenas.

use std::collections::BTreeSet;

use ialab_core::play::{check, legal_extensions};
use ialab_core::{make_arena, parse_type, Arena, Lang, MoveRef, PointedPlay};

type Seq = Vec<(MoveRef, Option<usize>)>;
type Visit<'a> = dyn FnMut(&Seq, [bool; 2], [bool; 2]) + 'a;

const SMALL: [&str; 4] = ["unit", "unit -> unit", "unit -> unit -> unit", "(unit -> unit) -> unit"];

/// Justified one-move extensions: initial moves point nowhere, the rest at
/// any earlier enabling occurrence.
fn justified_moves(a: &Arena, s: &Seq) -> Seq {
    let mut out = Vec::new();
    for m in a.moves() {
        if a.is_initial(m) {
            out.push((m, None));
        } else {
            out.extend((0..s.len()).filter(|&j| a.enables(s[j].0, m)).map(|j| (m, Some(j))));
        }
    }
    out
}

fn legal(a: &Arena, lang: Lang, s: &Seq) -> bool {
    check(a, lang, &PointedPlay::from_positions(s)).unwrap().is_legal()
}

/// Visits every justified sequence up to `max_len` with the legality of its
/// parent in each language.
fn walk(a: &Arena, s: &mut Seq, parent: [bool; 2], max_len: usize, visit: &mut Visit<'_>) {
    let here = Lang::ALL.map(|lang| legal(a, lang, s));
    visit(s, parent, here);
    if s.len() == max_len {
        return;
    }
    for m in justified_moves(a, s) {
        s.push(m);
        walk(a, s, here, max_len, visit);
        s.pop();
    }
}

#[test]
fn legality_is_prefix_closed_up_to_length_8() {
    for text in SMALL {
        let a = make_arena(&parse_type(text).unwrap());
        assert!(a.node_count() <= 3);
        let mut seen = 0usize;
        let mut legal_count = [0usize; 2];
        walk(&a, &mut Vec::new(), [true; 2], 8, &mut |s, parent, here| {
            seen += 1;
            for k in 0..2 {
                if here[k] {
                    legal_count[k] += 1;
                    assert!(parent[k], "{text} {:?}: legal with illegal prefix {s:?}", Lang::ALL[k]);
                }
            }
        });
        assert!(legal_count.iter().all(|&n| n > 1), "{text}: {legal_count:?} of {seen}");
    }
}

#[test]
fn legal_extensions_match_brute_force() {
    for text in SMALL {
        let a = make_arena(&parse_type(text).unwrap());
        for lang in Lang::ALL {
            let mut checked = 0;
            walk(&a, &mut Vec::new(), [true; 2], 5, &mut |s, _, here| {
                if !here[lang as usize] {
                    return;
                }
                let p = PointedPlay::from_positions(s);
                let fresh = p.fresh_name();
                let got: BTreeSet<(u32, Option<usize>)> = legal_extensions(&a, lang, &p)
                    .unwrap()
                    .into_iter()
                    .map(|m| {
                        assert_eq!(m.name, fresh);
                        (m.mv.0, m.justifier.map(|n| n as usize))
                    })
                    .collect();
                let want: BTreeSet<(u32, Option<usize>)> = justified_moves(&a, s)
                    .into_iter()
                    .filter(|&m| {
                        let mut t = s.clone();
                        t.push(m);
                        legal(&a, lang, &t)
                    })
                    .map(|(m, j)| (m.0, j))
                    .collect();
                assert_eq!(got, want, "{text} {lang:?} {s:?}");
                checked += 1;
            });
            assert!(checked > 1);
        }
    }
}
