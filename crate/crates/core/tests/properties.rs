use ialab_core::corpus::{self, edit_distance, edit_budget, elide, levenshtein, perturb, TokenSeq};
use ialab_core::play::{self, check, check_concurrent, check_sequential, oview, pview, reconstruct, Reconstruction};
use ialab_core::{make_arena, parse_type, rng, Lang, MoveKind, PointedPlay, TypeTree};
use proptest::prelude::*;

fn arb_tree() -> impl Strategy<Value = TypeTree> {
    let leaf = Just(TypeTree::unit());
    leaf.prop_recursive(3, 12, 3, |inner| prop::collection::vec(inner, 1..=3).prop_map(TypeTree::arrow))
}

fn arb_lang() -> impl Strategy<Value = Lang> {
    prop_oneof![Just(Lang::Sequential), Just(Lang::Concurrent)]
}

fn sample(tree: &TypeTree, lang: Lang, seed: u64, max_len: usize) -> PointedPlay {
    let arena = make_arena(tree);
    let mut r = rng::stream(seed, rng::PLAYS, 0);
    corpus::generate_play(&arena, lang, max_len, 0.05, &mut r)
}

/// Textbook full-table edit distance.
fn full_table_distance(a: &[u32], b: &[u32]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// Positions of the view's occurrences in `s`, by name.
fn positions(s: &PointedPlay, view: &PointedPlay) -> Vec<usize> {
    view.items.iter().map(|m| s.items.iter().position(|x| x.name == m.name).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn type_text_round_trips(tree in arb_tree()) {
        prop_assert_eq!(parse_type(&tree.to_string()).unwrap(), tree);
    }

    #[test]
    fn arena_structure(tree in arb_tree()) {
        let a = make_arena(&tree);
        prop_assert_eq!(a.move_count(), 2 * tree.node_count());
        prop_assert_eq!(a.initials(), [a.root_question()]);
        for m in a.moves() {
            prop_assert_eq!(a.lookup_token(&a.token(m)), Some(m));
            let depth_even = a.depth(m).is_multiple_of(2);
            let is_opponent = a.player(m) == ialab_core::Player::Opponent;
            match m.kind() {
                MoveKind::Question => prop_assert_eq!(is_opponent, depth_even),
                MoveKind::Answer => prop_assert_eq!(is_opponent, !depth_even),
            }
            match a.enabler(m) {
                None => prop_assert!(a.is_initial(m)),
                Some(e) => {
                    prop_assert_eq!(e.kind(), MoveKind::Question);
                    prop_assert_ne!(a.player(e), a.player(m));
                    if m.kind() == MoveKind::Answer {
                        prop_assert_eq!(e.node(), m.node());
                    }
                }
            }
        }
    }

    #[test]
    fn generated_plays_and_their_prefixes_are_legal(tree in arb_tree(), lang in arb_lang(), seed in any::<u64>()) {
        let a = make_arena(&tree);
        let s = sample(&tree, lang, seed, 12);
        prop_assert!(!s.is_empty());
        for len in 1..=s.len() {
            let p = s.prefix(len);
            prop_assert!(check(&a, lang, &p).unwrap().is_legal(), "prefix {} of {:?}", len, s);
        }
    }

    #[test]
    fn sequential_implies_concurrent(tree in arb_tree(), seed in any::<u64>()) {
        let a = make_arena(&tree);
        let s = sample(&tree, Lang::Sequential, seed, 12);
        prop_assert!(check_sequential(&a, &s).unwrap().is_legal());
        prop_assert!(check_concurrent(&a, &s).unwrap().is_legal());
    }

    #[test]
    fn views_are_subsequences_ending_in_the_last_move(tree in arb_tree(), lang in arb_lang(), seed in any::<u64>()) {
        let a = make_arena(&tree);
        let s = sample(&tree, lang, seed, 10);
        for view in [pview(&a, &s).unwrap(), oview(&a, &s).unwrap()] {
            let pos = positions(&s, &view);
            prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(pos.last().copied(), Some(s.len() - 1));
        }
    }

    #[test]
    fn pointer_free_plays_reconstruct_as_legal(tree in arb_tree(), lang in arb_lang(), seed in any::<u64>()) {
        let a = make_arena(&tree);
        let s = sample(&tree, lang, seed, 10);
        let moves: Vec<_> = s.moves().collect();
        let r = reconstruct(&a, lang, &moves, 200_000);
        prop_assert!(r.is_legal() || r == Reconstruction::Undetermined, "{:?}", r);
        if let Reconstruction::Unique(p) = r {
            prop_assert!(check(&a, lang, &p).unwrap().is_legal());
        }
    }

    #[test]
    fn pending_questions_are_questions(tree in arb_tree(), lang in arb_lang(), seed in any::<u64>()) {
        let a = make_arena(&tree);
        let s = sample(&tree, lang, seed, 12);
        for name in play::pending_questions(&a, &s).unwrap() {
            let m = s.items.iter().find(|x| x.name == name).unwrap();
            prop_assert_eq!(m.mv.kind(), MoveKind::Question);
        }
    }

    #[test]
    fn two_row_distance_matches_full_table(
        a in prop::collection::vec(0u32..4, 0..14),
        b in prop::collection::vec(0u32..4, 0..14),
    ) {
        let d = edit_distance(&a, &b);
        prop_assert_eq!(d, full_table_distance(&a, &b));
        prop_assert_eq!(d, edit_distance(&b, &a));
        prop_assert!(d >= a.len().abs_diff(b.len()) && d <= a.len().max(b.len()));
    }

    #[test]
    fn perturbation_stays_within_budget(
        body in prop::collection::vec(1u32..9, 1..60),
        ratio in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let s = TokenSeq::from_moves(body.iter().copied()).unwrap();
        let mut r = rng::stream(seed, rng::PERTURB, 0);
        let p = perturb(&s, 9, &mut r, ratio).unwrap();
        prop_assert!(levenshtein(&s, &p) <= edit_budget(s.len(), ratio));
        prop_assert_eq!(p.ids().iter().filter(|&&id| id == 0).count(), 1);
        prop_assert!(p.moves().iter().all(|&id| (1..9).contains(&id)));
    }

    #[test]
    fn elision_keeps_moves(tree in arb_tree(), lang in arb_lang(), seed in any::<u64>()) {
        let s = sample(&tree, lang, seed, 12);
        let t = elide(&s);
        prop_assert_eq!(t.len(), s.len());
        prop_assert!(t.move_refs().eq(s.moves()));
    }
}
