mod common;

use common::*;
use twolevel::nf::nf_convert_two_level;
use twolevel::oracle::{oracle_stringsum_checked, oracle_stringsum, step_bound};
use twolevel::grammar::load_file;
use twolevel::semiring::{Semiring, SemiringKind, Weight};
use twolevel::stringsum::stringsum_str;

#[test]
fn example_converts_and_keeps_weights() {
    for sr in [Semiring::counting(), Semiring::boolean(), Semiring::real()] {
        let f = load_pair(&grammar_path("anbncndn.tlg"), sr);
        let conv = nf_convert_two_level(&f.controller, &f.controllee).unwrap();
        let g = merged(&f);
        for s in ["", "abcd", "aabbccdd", "aaabbbcccddd", "abc", "abdc", "aabbcd", "d"] {
            let toks = g.tokenize(s).unwrap();
            let (want, complete) = oracle_stringsum_checked(&g, &toks, step_bound(toks.len()) * 4).unwrap();
            assert!(complete, "{s}");
            let got = stringsum_str(&conv.nf, s).unwrap();
            assert!(same_weight(want, got, 1e-9), "{} {s:?}: {want} vs {got}", sr.name());
        }
    }
}

fn check_preserved(kind: SemiringKind, seed: u64, pairs: usize) {
    let (compared, nonzero) = preservation_check(kind, seed, pairs).unwrap_or_else(|e| panic!("{e}"));
    eprintln!("{}: {compared} strings compared, {nonzero} nonzero", kind.name());
}

#[test]
fn general_pairs_real() {
    check_preserved(SemiringKind::Real, 11, 60);
}

#[test]
fn general_pairs_counting() {
    check_preserved(SemiringKind::Counting, 12, 60);
}

#[test]
fn general_pairs_boolean() {
    check_preserved(SemiringKind::Boolean, 13, 60);
}

/// On pairs with unbounded derivation families the oracle only gives lower
/// bounds, which the normal form must respect.
#[test]
fn cyclic_pairs_bounded_below() {
    for kind in [SemiringKind::Real, SemiringKind::Counting, SemiringKind::Boolean] {
        let sr = Semiring::new(kind);
        let mut rng = rng(21);
        let mut checked = 0;
        while checked < 20 {
            let txt = random_general_text(&mut rng, kind, false);
            let f = load_file(&txt, &sr).unwrap();
            let g = merged(&f);
            let conv = nf_convert_two_level(&f.controller, &f.controllee).unwrap_or_else(|e| panic!("{e}\n{txt}"));
            let alphabet: Vec<u32> = g.sym.terminals.ids().collect();
            for s in strings_up_to(&alphabet, 2) {
                let Ok(low) = oracle_stringsum(&g, &s, 10) else { continue };
                let text = g.render_string(&s);
                let got = match conv.nf.grammar.tokenize(&text) {
                    Ok(t) => twolevel::stringsum::stringsum(&conv.nf, &t).unwrap(),
                    Err(_) => sr.zero(),
                };
                let ok = match (low, got) {
                    (Weight::Real(a), Weight::Real(b)) => a <= b * (1.0 + 1e-9) + 1e-12,
                    _ => sr.leq(low, got),
                };
                assert!(ok, "{text:?}: oracle {low} above {got}\n{txt}");
            }
            checked += 1;
        }
    }
}

#[test]
fn unary_self_loop_matches_geometric_sum() {
    let txt = "formalism cc\n\
        controller cfg start S1\nS1 -> \"u\" S1 @ 0.5\nS1 -> \"t\" @ 1.0\n\n\
        controllee ldcfg start S\nu : S -> *S @ 0.8\nt : S -> 'a' @ 1.0\n";
    let f = load_file(txt, &Semiring::real()).unwrap();
    let g = merged(&f);
    let conv = nf_convert_two_level(&f.controller, &f.controllee).unwrap();
    assert_eq!(conv.nf.grammar.rules.iter().filter(|r| r.rhs.len() == 1 && r.dist().is_some()).count(), 0);
    let got = stringsum_str(&conv.nf, "a").unwrap().to_f64();
    // Each loop costs a factor 0.4.
    assert!((got - 1.0 / 0.6).abs() < 1e-9, "{got}");
    let toks = g.tokenize("a").unwrap();
    let deep = oracle_stringsum(&g, &toks, 120).unwrap().to_f64();
    assert!((deep - got).abs() < 1e-9, "{deep} vs {got}");
}
