//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ialab::corpus_file::format_corpus;
use ialab_core::corpus::{build_vocab, elide, generate_indexed_play, perturb, GenConfig};
use ialab_core::experiment::{evaluate_cell, train_cell, Cell, ExperimentSpec, Perplexities, TestKind, TrainedCell};
use ialab_core::play::{check, check_concurrent, check_sequential};
use ialab_core::seqmodel::{backward, forward, init_model, loss_bits, perplexity, sgd_epoch, LstmModel, LstmState, ModelConfig, IGNORE};
use ialab_core::{make_arena, parse_type, rng, Arena, Corpus, Lang, MoveKind, MoveRef, Player, PointedPlay, Rule, TokenSeq, TypeTree, Verdict};

type Seq = Vec<(MoveRef, Option<usize>)>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= budget, format!("{:.1}s of {}s", t.as_secs_f64(), budget.as_secs()))
}

fn arena(text: &str) -> Arena {
    make_arena(&parse_type(text).unwrap())
}

// ---- enumeration and reference checkers ----

/// Every justified sequence up to `max_len`: each initial move points
/// nowhere, every other move at any earlier enabling occurrence.
fn enumerate(a: &Arena, max_len: usize) -> Vec<Seq> {
    fn go(a: &Arena, cur: &mut Seq, max_len: usize, out: &mut Vec<Seq>) {
        out.push(cur.clone());
        if cur.len() == max_len {
            return;
        }
        for m in a.moves() {
            let ptrs: Vec<Option<usize>> = if a.is_initial(m) {
                vec![None]
            } else {
                (0..cur.len()).filter(|&j| a.enables(cur[j].0, m)).map(Some).collect()
            };
            for p in ptrs {
                cur.push((m, p));
                go(a, cur, max_len, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(a, &mut Vec::new(), max_len, &mut out);
    out
}

fn answered(s: &[(MoveRef, Option<usize>)], q: usize) -> bool {
    s.iter().any(|&(m, p)| m.kind() == MoveKind::Answer && p == Some(q))
}

fn pending(s: &[(MoveRef, Option<usize>)]) -> Vec<usize> {
    (0..s.len()).filter(|&i| s[i].0.kind() == MoveKind::Question && !answered(s, i)).collect()
}

fn ref_pview(a: &Arena, s: &[(MoveRef, Option<usize>)]) -> Vec<usize> {
    let Some(&(m, p)) = s.last() else { return Vec::new() };
    let i = s.len() - 1;
    match p {
        None => vec![i],
        Some(_) if a.player(m) == Player::Proponent => {
            let mut v = ref_pview(a, &s[..i]);
            v.push(i);
            v
        }
        Some(j) => {
            let mut v = ref_pview(a, &s[..j]);
            v.extend([j, i]);
            v
        }
    }
}

fn ref_oview(a: &Arena, s: &[(MoveRef, Option<usize>)]) -> Vec<usize> {
    let Some(&(m, p)) = s.last() else { return Vec::new() };
    let i = s.len() - 1;
    match p {
        Some(j) if a.player(m) == Player::Proponent => {
            let mut v = ref_oview(a, &s[..j]);
            v.extend([j, i]);
            v
        }
        _ => {
            let mut v = ref_oview(a, &s[..i]);
            v.push(i);
            v
        }
    }
}

fn ref_justified(a: &Arena, s: &Seq, i: usize) -> bool {
    match s[i].1 {
        None => i == 0 && a.is_initial(s[i].0),
        Some(j) => j < i && a.enables(s[j].0, s[i].0),
    }
}

fn ref_sequential(a: &Arena, s: &Seq) -> Verdict {
    for i in 0..s.len() {
        let (m, p) = s[i];
        let prefix = &s[..i];
        if !ref_justified(a, s, i) {
            return Verdict::violated(Rule::Justification, i);
        }
        let alternates = if i == 0 { a.player(m) == Player::Opponent } else { a.player(m) != a.player(s[i - 1].0) };
        if !alternates {
            return Verdict::violated(Rule::Alternation, i);
        }
        if m.kind() == MoveKind::Answer && pending(prefix).last().copied() != p {
            return Verdict::violated(Rule::Bracketing, i);
        }
        if let Some(j) = p {
            let view = if a.player(m) == Player::Proponent { ref_pview(a, prefix) } else { ref_oview(a, prefix) };
            if !view.contains(&j) {
                return Verdict::violated(Rule::Visibility, i);
            }
        }
    }
    Verdict::LEGAL
}

fn ref_concurrent(a: &Arena, s: &Seq) -> Verdict {
    for i in 0..s.len() {
        let (m, p) = s[i];
        let prefix = &s[..i];
        if !ref_justified(a, s, i) {
            return Verdict::violated(Rule::Justification, i);
        }
        let Some(j) = p else { continue };
        if answered(prefix, j) {
            return Verdict::violated(Rule::Fork, i);
        }
        let open_children = (0..i).any(|k| s[k].1 == Some(j) && s[k].0.kind() == MoveKind::Question && !answered(prefix, k));
        if m.kind() == MoveKind::Answer && open_children {
            return Verdict::violated(Rule::Join, i);
        }
    }
    Verdict::LEGAL
}

fn pointed(s: &Seq) -> PointedPlay {
    PointedPlay::from_positions(s)
}

/// Moves and justifier positions of a play, names forgotten.
fn positions(p: &PointedPlay) -> Seq {
    p.items
        .iter()
        .map(|m| (m.mv, m.justifier.map(|n| p.items.iter().position(|x| x.name == n).unwrap())))
        .collect()
}

// ---- criteria ----

fn criterion_1_and_3() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let mut containment_broken = 0;
    let mut witnesses = 0;
    for text in ["unit -> unit", "unit -> unit -> unit"] {
        let a = arena(text);
        for s in enumerate(&a, 6) {
            let p = pointed(&s);
            let seq = check_sequential(&a, &p).unwrap();
            let conc = check_concurrent(&a, &p).unwrap();
            checked += 1;
            if seq != ref_sequential(&a, &s) || conc != ref_concurrent(&a, &s) {
                mismatches.push(format!("{text}: {s:?}"));
            }
            if seq.is_legal() && !conc.is_legal() {
                containment_broken += 1;
            }
            if conc.is_legal() && !seq.is_legal() {
                witnesses += 1;
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    let first = mismatches.first().cloned().unwrap_or_default();
    (
        outcome(mismatches.is_empty() && fast, format!("{checked} sequences, {} mismatches {first}, {time}", mismatches.len())),
        outcome(
            containment_broken == 0 && witnesses > 0,
            format!("{containment_broken} seq-legal plays rejected by conc, {witnesses} conc-only witnesses"),
        ),
    )
}

fn seq_composition_play() -> PointedPlay {
    let a = arena("unit -> unit -> unit");
    let m = |t: &str| a.lookup_token(t).unwrap();
    pointed(&vec![
        (m("q@ε"), None),
        (m("q@1"), Some(0)),
        (m("a@1"), Some(1)),
        (m("q@2"), Some(0)),
        (m("a@2"), Some(3)),
        (m("a@ε"), Some(0)),
    ])
}

fn criterion_2() -> Outcome {
    let a = arena("unit -> unit -> unit");
    let m = |t: &str| a.lookup_token(t).unwrap();
    let seq_play = seq_composition_play();
    let par_play = pointed(&vec![
        (m("q@ε"), None),
        (m("q@1"), Some(0)),
        (m("q@2"), Some(0)),
        (m("a@1"), Some(1)),
        (m("a@2"), Some(2)),
        (m("a@ε"), Some(0)),
    ]);
    let u = arena("unit -> unit");
    let n = |t: &str| u.lookup_token(t).unwrap();
    let fork = pointed(&vec![(n("q@ε"), None), (n("a@ε"), Some(0)), (n("q@1"), Some(0))]);
    let join = pointed(&vec![(n("q@ε"), None), (n("q@1"), Some(0)), (n("a@ε"), Some(0))]);
    let got = [
        check_sequential(&a, &seq_play).unwrap(),
        check_concurrent(&a, &seq_play).unwrap(),
        check_concurrent(&a, &par_play).unwrap(),
        check_sequential(&a, &par_play).unwrap(),
        check_concurrent(&u, &fork).unwrap(),
        check_concurrent(&u, &join).unwrap(),
    ];
    let want = [
        Verdict::LEGAL,
        Verdict::LEGAL,
        Verdict::LEGAL,
        Verdict::violated(Rule::Alternation, 2),
        Verdict::violated(Rule::Fork, 2),
        Verdict::violated(Rule::Join, 2),
    ];
    let shown: Vec<String> = got.iter().map(Verdict::to_string).collect();
    outcome(got == want, shown.join(", "))
}

/// Arenas of order at most 2 and width at most 2.
fn small_arenas() -> Vec<String> {
    let first = ["unit", "unit -> unit", "unit -> unit -> unit"];
    let arg = |t: &str| if t == "unit" { t.to_string() } else { format!("({t})") };
    let mut out = vec!["unit".to_string()];
    for x in first {
        out.push(format!("{} -> unit", arg(x)));
        for y in first {
            out.push(format!("{} -> {} -> unit", arg(x), arg(y)));
        }
    }
    out
}

const GEN_SEED: u64 = 4;
const SAMPLES: usize = 10_000;

/// Runs the generator checks and returns the corpora it drew.
fn criterion_4() -> (Outcome, Vec<String>) {
    let start = Instant::now();
    let cfg = GenConfig::default();
    let mut failures = 0;
    let mut corpora = Vec::new();
    let mut seen: HashSet<Seq> = HashSet::new();
    let arenas = small_arenas();
    for text in &arenas {
        let a = arena(text);
        assert!(a.order() <= 2 && a.width() <= 2, "{text}");
        for lang in Lang::ALL {
            let mut plays = Vec::with_capacity(SAMPLES);
            for i in 0..SAMPLES {
                let p = generate_indexed_play(&a, lang, &cfg, GEN_SEED, i).unwrap();
                if !check(&a, lang, &p).unwrap().is_legal() {
                    failures += 1;
                }
                if text == "unit -> unit" && lang == Lang::Sequential {
                    let s = positions(&p);
                    for k in 1..=s.len().min(4) {
                        seen.insert(s[..k].to_vec());
                    }
                }
                plays.push(elide(&p));
            }
            let c = Corpus { arena: a.type_tree().to_string(), lang, seed: GEN_SEED, plays };
            corpora.push(format_corpus(&c, &build_vocab(&a)));
        }
    }
    let u = arena("unit -> unit");
    let legal: Vec<Seq> = enumerate(&u, 4)
        .into_iter()
        .filter(|s| !s.is_empty() && check_sequential(&u, &pointed(s)).unwrap().is_legal())
        .collect();
    let missing = legal.iter().filter(|s| !seen.contains(*s)).count();
    let (fast, time) = within(start, Duration::from_secs(120));
    let detail = format!(
        "{} arenas x 2 langs x {SAMPLES} plays, {failures} illegal; {}/{} short legal plays covered, {time}",
        arenas.len(),
        legal.len() - missing,
        legal.len()
    );
    (outcome(failures == 0 && missing == 0 && fast, detail), corpora)
}

fn dp_levenshtein(a: &[u32], b: &[u32]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn criterion_5() -> Outcome {
    let a = make_arena(&TypeTree::uniform(2, 5));
    let cfg = GenConfig::default();
    let mut plays: Vec<TokenSeq> = Vec::new();
    let mut i = 0;
    while plays.len() < SAMPLES && i < 20 * SAMPLES {
        let p = generate_indexed_play(&a, Lang::Concurrent, &cfg, 5, i).unwrap();
        if p.len() == 50 {
            plays.push(elide(&p));
        }
        i += 1;
    }
    let vocab = a.move_count() + 1;
    let mut worst = 0;
    let mut over = 0;
    for (i, p) in plays.iter().enumerate() {
        let mut r = rng::stream(5, rng::PERTURB, i as u64);
        let q = perturb(p, vocab, &mut r, 0.1).unwrap();
        let d = dp_levenshtein(p.moves(), q.moves());
        worst = worst.max(d);
        over += usize::from(d > 5);
    }
    outcome(plays.len() == SAMPLES && over == 0, format!("{} plays of length 50, max distance {worst}", plays.len()))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut cfg = ModelConfig::new(4);
    cfg.embed_dim = 5;
    cfg.hidden_dim = 8;
    cfg.layers = 2;
    cfg.init_scale = 0.5;
    cfg.seed = 11;
    let mut model = init_model(&cfg).unwrap();
    for (i, x) in model.params_mut().iter_mut().enumerate() {
        *x += 0.1 * (0.7 * i as f64).sin();
    }
    let (batch, steps) = (3, 5);
    let ids: Vec<u32> = (0..batch * steps).map(|i| ((i * 7 + 3) % 4) as u32).collect();
    let mut targets: Vec<u32> = (0..batch * steps).map(|i| ((i * 5 + 1) % 4) as u32).collect();
    targets[steps - 1] = IGNORE;
    // a carried state, so recurrent weights get gradients well above round-off
    let mut state = LstmState::zeros(&cfg, batch);
    for (k, x) in state.h.iter_mut().chain(state.c.iter_mut()).flatten().enumerate() {
        *x = 0.8 * (1.3 * k as f64 + 0.4).sin();
    }
    let (grads, _, _, _) = backward(&model, &ids, &targets, batch, &state).unwrap();
    let loss = |m: &LstmModel| loss_bits(&forward(m, &ids, batch, &state).unwrap().0, &targets).unwrap().0;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..model.params().len() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + eps;
        let up = loss(&model);
        model.params_mut()[i] = orig - eps;
        let down = loss(&model);
        model.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.data[i];
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7));
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    outcome(worst <= 1e-4 && fast, format!("{} parameters, max relative error {worst:.2e}, {time}", model.params().len()))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let vocab = 7;
    let mut cfg = ModelConfig::new(vocab);
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    let zero = LstmModel::from_parts(cfg.clone(), vec![0.0; cfg.parameter_count()]).unwrap();
    let plays = [TokenSeq::from_moves([1, 6, 3]).unwrap(), TokenSeq::from_moves([2]).unwrap()];
    let psi_zero = perplexity(&zero, &plays).unwrap().perplexity();

    // the sequential composition play: each move determines the next, so
    // nothing depends on state carried over from the previous play
    let play = elide(&seq_composition_play());
    let mut cfg = ModelConfig::new(7);
    cfg.embed_dim = 16;
    cfg.hidden_dim = 32;
    let mut stream = vec![0u32];
    for _ in 0..5000 {
        stream.extend_from_slice(play.ids());
    }
    let mut model = init_model(&cfg).unwrap();
    let mut best = f64::INFINITY;
    for epoch in 1..=2 {
        sgd_epoch(&mut model, &stream, epoch, &mut ()).unwrap();
        best = best.min(perplexity(&model, std::slice::from_ref(&play)).unwrap().perplexity());
    }
    let (fast, time) = within(start, Duration::from_secs(120));
    outcome(
        (psi_zero - vocab as f64).abs() <= 1e-9 && best <= 1.05 && fast,
        format!("zero model {psi_zero} for vocab {vocab}, memorised play {best:.4}, {time}"),
    )
}

fn desk_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::desk();
    spec.validation_size = 10_000;
    spec.test_size = 10_000;
    spec
}

fn desk_cell(lang: Lang) -> Cell {
    Cell { lang, order: 2, width: 1, train_size: 10_000 }
}

fn criterion_8(spec: &ExperimentSpec) -> (Outcome, TrainedCell, Perplexities) {
    let start = Instant::now();
    let trained = train_cell(spec, desk_cell(Lang::Sequential), &mut ()).unwrap();
    let p = evaluate_cell(spec, &trained, TestKind::Perturbed).unwrap();
    let (fast, time) = within(start, Duration::from_secs(30 * 60));
    let vt = p.validation_over_train();
    let tv = p.test_over_validation();
    let detail = format!(
        "train {:.4}, validation {:.4}, perturbed {:.4}, validation/train {vt:.3}, perturbed/validation {tv:.2}, {time}",
        p.train, p.validation, p.test
    );
    (outcome((vt - 1.0).abs() <= 0.25 && tv >= 2.0 && fast, detail), trained, p)
}

fn criterion_9(spec: &ExperimentSpec, seq: &TrainedCell, seq_seconds: f64) -> Outcome {
    let start = Instant::now();
    let on_conc = evaluate_cell(spec, seq, TestKind::CrossLanguage).unwrap();
    let conc = train_cell(spec, desk_cell(Lang::Concurrent), &mut ()).unwrap();
    let on_seq = evaluate_cell(spec, &conc, TestKind::CrossLanguage).unwrap();
    let total = seq_seconds + start.elapsed().as_secs_f64();
    let up = on_conc.test_over_validation();
    let down = on_seq.test_over_validation();
    let detail = format!(
        "seq model: validation {:.4}, on conc {:.4} ({up:.2}x); conc model: validation {:.4}, on seq {:.4} ({down:.2}x); {total:.1}s of 3600s",
        on_conc.validation, on_conc.test, on_seq.validation, on_seq.test
    );
    outcome(up >= 10.0 && down <= 3.0 && total <= 3600.0, detail)
}

fn criterion_10(corpora: &[String], first: &Perplexities, spec: &ExperimentSpec) -> Outcome {
    let (_, again) = criterion_4();
    let same_corpora = again == corpora;
    let trained = train_cell(spec, desk_cell(Lang::Sequential), &mut ()).unwrap();
    let second = evaluate_cell(spec, &trained, TestKind::Perturbed).unwrap();
    let bytes: usize = corpora.iter().map(String::len).sum();
    outcome(
        same_corpora && second == *first,
        format!("corpora identical: {same_corpora} ({bytes} bytes); perplexities identical: {}", second == *first),
    )
}

fn main() -> ExitCode {
    let mut lines: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push((n, o));
    };
    let (one, three) = criterion_1_and_3();
    report(1, one);
    report(2, criterion_2());
    report(3, three);
    let (four, corpora) = criterion_4();
    report(4, four);
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    let spec = desk_spec();
    let start = Instant::now();
    let (eight, seq, perplexities) = criterion_8(&spec);
    let seq_seconds = start.elapsed().as_secs_f64();
    report(8, eight);
    report(9, criterion_9(&spec, &seq, seq_seconds));
    report(10, criterion_10(&corpora, &perplexities, &spec));
    let failed: Vec<usize> = lines.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
