mod common;

use std::collections::HashMap;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use twolevel::control::classify_nf;
use twolevel::grammar::{load, load_file, GrammarSpec, PdaTrans, Sym, Wcfg, Wldcfg, Wpda};
use twolevel::nf::*;
use twolevel::oracle::{oracle_stringsum_checked, step_bound};
use twolevel::semiring::{Semiring, SemiringKind, Weight};
use twolevel::stringsum::stringsum_str;

/// Sum over leftmost derivations of `target`, expanding at most `budget`
/// rules. Returns the weight and whether the budget ever cut a branch.
fn wcfg_weight(g: &Wcfg, target: &[&str], budget: usize) -> (Weight, bool) {
    let sr = g.semiring;
    let mut by_lhs: HashMap<&str, Vec<&twolevel::grammar::CfgRule>> = HashMap::new();
    for r in &g.rules {
        by_lhs.entry(r.lhs.as_str()).or_default().push(r);
    }
    fn go(
        sr: &Semiring,
        by_lhs: &HashMap<&str, Vec<&twolevel::grammar::CfgRule>>,
        form: Vec<Sym>,
        done: usize,
        target: &[&str],
        budget: usize,
        cut: &mut bool,
    ) -> Weight {
        // Match the terminal prefix.
        let mut done = done;
        let mut k = 0;
        while k < form.len() {
            match &form[k] {
                Sym::T(t) => {
                    if done >= target.len() || target[done] != t {
                        return sr.zero();
                    }
                    done += 1;
                    k += 1;
                }
                Sym::Nt(_) => break,
            }
        }
        let rest = &form[k..];
        let terms = rest.iter().filter(|s| !s.is_nt()).count();
        if done + terms > target.len() {
            return sr.zero();
        }
        let Some(Sym::Nt(a)) = rest.first() else {
            return if done == target.len() { sr.one() } else { sr.zero() };
        };
        if budget == 0 {
            *cut = true;
            return sr.zero();
        }
        let mut total = sr.zero();
        for r in by_lhs.get(a.as_str()).into_iter().flatten() {
            let mut next = r.rhs.clone();
            next.extend(rest[1..].iter().cloned());
            let w = go(sr, by_lhs, next, done, target, budget - 1, cut);
            total = sr.add(total, sr.mul(r.weight, w));
        }
        total
    }
    let mut cut = false;
    let w = go(&sr, &by_lhs, vec![Sym::Nt(g.start.clone())], 0, target, budget, &mut cut);
    (w, cut)
}

/// A random WCFG over {a, b} with ε and unary rules, right-hand sides up to
/// length 4, and no derivation cycles that emit nothing.
fn random_wcfg(rng: &mut rand_chacha::ChaCha8Rng, kind: SemiringKind) -> Wcfg {
    let sr = Semiring::new(kind);
    let n = rng.gen_range(1..=4);
    let nts: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut g = Wcfg::new(sr, "N0");
    for i in 0..n + rng.gen_range(1..=6) {
        let a = if i < n { i } else { rng.gen_range(0..n) };
        let len = *[0, 1, 1, 2, 2, 3, 4].choose(rng).unwrap();
        let mut rhs: Vec<Sym> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Sym::T(["a", "b"].choose(rng).unwrap().to_string())
                } else {
                    Sym::Nt(nts.choose(rng).unwrap().clone())
                }
            })
            .collect();
        // Nonterminals ahead of any output point further down the order, so
        // no derivation cycles without output.
        // The same holds for everything before the first terminal.
        let first_t = rhs.iter().position(|s| !s.is_nt()).unwrap_or(rhs.len());
        for (k, s) in rhs.iter_mut().enumerate() {
            if let Sym::Nt(x) = s {
                let idx: usize = x[1..].parse().unwrap();
                if k < first_t && idx <= a {
                    *s = if a + 1 < n {
                        Sym::Nt(nts[rng.gen_range(a + 1..n)].clone())
                    } else {
                        Sym::T("a".into())
                    };
                }
            }
        }
        let w = sr.parse_weight(&weight_text(rng, kind)).unwrap();
        g.add(&nts[a], rhs, w);
    }
    g
}

fn words(max: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..max {
        let mut next = Vec::new();
        for w in &layer {
            for t in ["a", "b"] {
                let mut v = w.clone();
                v.push(t);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[test]
fn cnf_preserves_random_wcfgs() {
    let mut compared = 0;
    for kind in [SemiringKind::Real, SemiringKind::Counting, SemiringKind::Boolean] {
        let sr = Semiring::new(kind);
        let mut rng = rng(31);
        for _ in 0..60 {
            let g = random_wcfg(&mut rng, kind);
            let c = cnf_convert_wcfg(&g).unwrap();
            assert!(is_cnf(&c), "{c:?}");
            for w in words(4) {
                let (want, cut) = wcfg_weight(&g, &w, 200);
                assert!(!cut, "{w:?}\n{g:?}");
                let (got, _) = wcfg_weight(&c, &w, 2 * w.len() + 1);
                assert!(same_weight(want, got, 1e-9), "{w:?}: {want} vs {got}\n{g:?}\n{c:?}");
                compared += usize::from(!sr.is_zero(want));
            }
        }
    }
    eprintln!("{compared} nonzero comparisons");
    assert!(compared > 200, "only {compared} nonzero comparisons");
}

fn wcfg(text: &str, sr: Semiring) -> Wcfg {
    match load(text, &sr).unwrap() {
        GrammarSpec::Wcfg(g) => g,
        _ => unreachable!(),
    }
}

fn wldcfg(text: &str, sr: Semiring) -> Wldcfg {
    match load(text, &sr).unwrap() {
        GrammarSpec::Wldcfg(g) => g,
        _ => unreachable!(),
    }
}

#[test]
fn cnf_of_anbn_counts_one_parse() {
    let g = wcfg("controller cfg start S\nS -> \"a\" S \"b\"\nS ->\n", Semiring::counting());
    let c = cnf_convert_wcfg(&g).unwrap();
    assert!(is_cnf(&c));
    assert_eq!(wcfg_weight(&c, &["a", "b"], 10).0, Semiring::counting().one());
    assert_eq!(wcfg_weight(&c, &["a", "a", "b", "b"], 10).0, Semiring::counting().one());
    assert!(Semiring::counting().is_zero(wcfg_weight(&c, &["a", "b", "b"], 10).0));
}

#[test]
fn cnf_of_lone_empty_rule() {
    let g = wcfg("controller cfg start S\nS -> @ 0.5\n", Semiring::real());
    let c = cnf_convert_wcfg(&g).unwrap();
    assert_eq!(c.rules.len(), 1);
    assert!(c.rules[0].rhs.is_empty() && c.rules[0].lhs == c.start);
    assert_eq!(c.rules[0].weight, Weight::Real(0.5));
}

#[test]
fn nullary_and_unary_trivial_cases() {
    let sr = Semiring::real();
    let g = wcfg("controller cfg start S\nS -> \"a\" @ 0.5\nS -> S S @ 0.5\n", sr);
    assert!(nullary_weights_wcfg(&g).unwrap().is_empty());
    let u = unary_chain_weights_wcfg(&g).unwrap();
    assert_eq!(u.len(), 1);
    assert_eq!(u[&("S".to_string(), "S".to_string())], sr.one());
    let g = wcfg("controller cfg start A\nA -> B @ 0.25\nB -> \"a\"\n", sr);
    assert_eq!(unary_chain_weights_wcfg(&g).unwrap()[&("A".to_string(), "B".to_string())], Weight::Real(0.25));
    let g = wcfg("controller cfg start A\nA -> @ 0.25\n", sr);
    assert_eq!(nullary_weights_wcfg(&g).unwrap()["A"], Weight::Real(0.25));
}

#[test]
fn nullary_quadratic_matches_truncated_enumeration() {
    let sr = Semiring::real();
    let g = wcfg("controller cfg start A\nA -> @ 0.3\nA -> A A @ 0.7\n", sr);
    let exact = nullary_weights_wcfg(&g).unwrap()["A"].to_f64();
    assert!((exact - 3.0 / 7.0).abs() < 1e-10);
    // Depth-bounded sums approach the least root from below.
    let mut d = 0.0;
    for _ in 0..20 {
        d = 0.3 + 0.7 * d * d;
    }
    assert!(d < exact && exact - d < 1e-3);
}

#[test]
fn binarize_splits_long_production() {
    let sr = Semiring::real();
    let cle = wldcfg("controllee ldcfg start X\nl : X -> A *B C @ 0.5\nm : A -> 'a'\nm2 : B -> 'b'\nm3 : C -> 'c'\n", sr);
    let ctrl = wcfg("controller cfg start S\nS -> \"l\" T\nT -> \"m2\"\n", sr);
    let (d, c) = binarize_controllee(&cle, &ctrl).unwrap();
    let chain: Vec<_> = d.rules.iter().filter(|r| r.label.starts_with("%l")).collect();
    assert_eq!(chain.len(), 2);
    assert_eq!(chain[0].lhs, "X");
    assert_eq!(chain[0].rhs[0], Sym::nt("A"));
    assert_eq!(chain[0].dist, Some(1));
    assert_eq!(chain[0].weight, Weight::Real(0.5));
    assert_eq!(chain[1].lhs, chain[0].rhs[1].name());
    assert_eq!(chain[1].rhs, vec![Sym::nt("B"), Sym::nt("C")]);
    assert_eq!(chain[1].dist, Some(0));
    assert_eq!(chain[1].weight, sr.one());
    let s_rule = c.rules.iter().find(|r| r.lhs == "S").unwrap();
    assert_eq!(
        s_rule.rhs,
        vec![Sym::T(chain[0].label.clone()), Sym::T(chain[1].label.clone()), Sym::nt("T")]
    );
    // Short productions are left alone.
    let (d2, _) = binarize_controllee(&d, &c).unwrap();
    assert_eq!(d2, d);
    let bad = wldcfg("controllee ldcfg start X\nl : X -> A B C\nm : A -> 'a'\nm : B -> 'a'\nm : C -> 'a'\n", sr);
    assert!(binarize_controllee(&bad, &ctrl).is_err());
}

/// Stringsums of merged pairs up to length `max`, by the oracle.
fn oracle_table(ctrl: &Wcfg, cle: &Wldcfg, max: usize) -> Vec<(String, Weight)> {
    let g = twolevel::control::control_cfg_cfg(ctrl, cle).unwrap();
    let alphabet: Vec<u32> = g.sym.terminals.ids().collect();
    let mut out = Vec::new();
    for s in strings_up_to(&alphabet, max) {
        let (w, complete) = oracle_stringsum_checked(&g, &s, step_bound(max) * 3).unwrap();
        assert!(complete);
        out.push((g.render_string(&s), w));
    }
    out
}

fn oracle_of(ctrl: &Wcfg, cle: &Wldcfg, s: &str) -> Weight {
    let g = twolevel::control::control_cfg_cfg(ctrl, cle).unwrap();
    match g.tokenize(s) {
        Ok(t) => oracle_stringsum_checked(&g, &t, step_bound(6) * 3).unwrap().0,
        Err(_) => g.semiring.zero(),
    }
}

fn example_parts(sr: Semiring) -> (Wcfg, Wldcfg) {
    let f = load_pair(&grammar_path("anbncndn.tlg"), sr);
    match (f.controller, f.controllee) {
        (GrammarSpec::Wcfg(c), GrammarSpec::Wldcfg(d)) => (c, d),
        _ => unreachable!(),
    }
}

#[test]
fn nullary_removal_on_example() {
    let sr = Semiring::counting();
    let (c, d) = example_parts(sr);
    let cnf = cnf_convert_wcfg(&twolevel::control::isolate_labels(&c).0).unwrap();
    let (c2, d2) = remove_nullary_controllee(&cnf, &d).unwrap();
    assert!(d2.rules.iter().filter(|r| r.rhs.is_empty()).all(|r| r.lhs == d2.start));
    for s in ["", "abcd", "aabbccdd", "abc", "aabbcd"] {
        assert_eq!(oracle_of(&c, &d, s), oracle_of(&c2, &d2, s), "{s:?}");
    }
}

#[test]
fn nullary_removal_requires_cnf() {
    let sr = Semiring::counting();
    let (c, d) = example_parts(sr);
    assert!(remove_nullary_controllee(&c, &d).is_err());
}

#[test]
fn unary_removal_folds_chains() {
    let sr = Semiring::real();
    let ctrl = wcfg("controller cfg start S\nS -> U S @ 0.5\nS -> \"t\" @ 0.5\nU -> \"u\"\n", sr);
    let cle = wldcfg("controllee ldcfg start X\nu : X -> *X @ 0.5\nt : X -> 'a'\n", sr);
    let cnf = cnf_convert_wcfg(&ctrl).unwrap();
    let (c2, d2) = remove_unary_controllee(&cnf, &cle).unwrap();
    assert!(d2.rules.iter().all(|r| !(r.rhs.len() == 1 && r.dist == Some(0))));
    let g2 = twolevel::control::control_cfg_cfg(&c2, &d2).unwrap();
    let nf = classify_nf(g2).unwrap();
    // 0.5 · Σ_k (0.25)^k
    let want = 0.5 / 0.75;
    assert!((stringsum_str(&nf, "a").unwrap().to_f64() - want).abs() < 1e-12);
    // Truncated derivation sums stay below the closed form.
    let g = twolevel::control::control_cfg_cfg(&ctrl, &cle).unwrap();
    let (lower, _) = oracle_stringsum_checked(&g, &g.tokenize("a").unwrap(), 40).unwrap();
    assert!(lower.to_f64() <= want + 1e-12 && lower.to_f64() > want - 1e-3);
    // Unary-free pairs are returned unchanged.
    let (c3, d3) = remove_unary_controllee(&c2, &d2).unwrap();
    assert_eq!((c3, d3), (c2, d2));
}

#[test]
fn root_foot_relabels_and_preserves() {
    let sr = Semiring::real();
    let ctrl = wcfg(
        "controller cfg start S\nS -> A B @ 0.5\nS -> \"l2\" @ 0.5\nA -> \"l1\"\nB -> \"l2\"\nB -> \"l3\" @ 0.25\n",
        sr,
    );
    let cle = wldcfg("controllee ldcfg start X\nl1 : X -> *Y Z @ 0.5\nl2 : Y -> 'a'\nl2 : Z -> 'b'\nl3 : X -> 'c'\n", sr);
    let (c2, d2) = root_foot_transform(&ctrl, &cle).unwrap();
    assert!(is_cnf(&c2));
    // One label per production afterwards.
    let labels = d2.labels();
    assert_eq!(labels.len(), d2.rules.len());
    // The chain X --l1--> Y --l2--> end is kept; l3 from Y is not.
    for (s, w) in oracle_table(&ctrl, &cle, 3) {
        assert!(same_weight(w, oracle_of(&c2, &d2, &s), 1e-12), "{s:?}");
    }
}

#[test]
fn pipeline_binarizes_long_controller_rules() {
    let sr = Semiring::counting();
    let f = load_file(
        "formalism cc\ncontroller cfg start S\nS -> \"l\" \"m\" \"k\"\n\ncontrollee ldcfg start X\nl : X -> A *X\nm : X -> *X B\nk : X -> 'c'\nk : A -> 'a'\nk : B -> 'b'\n",
        &sr,
    )
    .unwrap();
    let conv = nf_convert_two_level(&f.controller, &f.controllee).unwrap();
    let g = merged(&f);
    for s in ["acb", "ac", "c", "abc"] {
        let t = g.tokenize(s).unwrap();
        let want = oracle_stringsum_checked(&g, &t, 30).unwrap().0;
        assert_eq!(stringsum_str(&conv.nf, s).unwrap(), want, "{s}");
    }
}

#[test]
fn nf_pair_passes_through() {
    let mut r = rng(5);
    for _ in 0..10 {
        let (nf, txt) = random_nf(&mut r, twolevel::grammar::Variant::CC, SemiringKind::Counting);
        let f = load_file(&txt, &Semiring::counting()).unwrap();
        let conv = nf_convert_two_level(&f.controller, &f.controllee).unwrap();
        let alphabet: Vec<u32> = nf.grammar.sym.terminals.ids().collect();
        for s in strings_up_to(&alphabet, 4) {
            let text = nf.grammar.render_string(&s);
            let want = twolevel::stringsum::stringsum(&nf, &s).unwrap();
            let got = stringsum_str(&conv.nf, &text).unwrap_or(Semiring::counting().zero());
            assert_eq!(want, got, "{text}\n{txt}");
        }
    }
}

fn pda(text: &str, sr: Semiring) -> Wpda {
    match load(text, &sr).unwrap() {
        GrammarSpec::Wpda(p) => p,
        _ => unreachable!(),
    }
}

#[test]
fn prepare_rewrites_scanning_pushes() {
    let sr = Semiring::real();
    let p = pda("controller pda init q S final f\nq , S -> q , A B @ 0.5 scan \"l\"\nq , A -> f , scan \"m\"\nf , B -> f , scan \"m\"\n", sr);
    let out = prepare_wpda(&p).unwrap();
    assert!(out.residue.is_empty());
    let t0 = &out.pda.trans[0];
    assert!(t0.scan.is_none() && t0.push.len() == 2 && t0.weight == Weight::Real(0.5));
    // A three-symbol push, binarized into two two-symbol pushes.
    assert_eq!(out.pda.trans.iter().filter(|t| t.scan.is_none()).count(), 2);
    assert!(out.pda.trans.iter().all(|t| (t.scan.is_some() && t.push.is_empty()) || (t.scan.is_none() && t.push.len() == 2)));
}

#[test]
fn prepare_chains_long_pushes() {
    let sr = Semiring::real();
    let p = pda(
        "controller pda init q S final f\nq , S -> f , A B C D @ 0.5\nf , A -> f , scan \"a\"\nf , B -> f , scan \"b\"\nf , C -> f , scan \"c\"\nf , D -> f , scan \"d\"\n",
        sr,
    );
    let out = prepare_wpda(&p).unwrap();
    let pushes: Vec<&PdaTrans> = out.pda.trans.iter().filter(|t| t.scan.is_none()).collect();
    assert_eq!(pushes.len(), 3);
    assert!(pushes.iter().all(|t| t.push.len() == 2));
    assert_eq!(pushes.iter().filter(|t| t.weight == Weight::Real(0.5)).count(), 1);
    // Both automata control the same controllee to the same weights.
    let cle = "controllee ldcfg start X\na : X -> 'a' *Y\nb : Y -> 'b' *Z\nc : Z -> 'c' *W\nd : W -> 'd'\n";
    let cle = load(cle, &sr).unwrap();
    let g1 = twolevel::control::control(&GrammarSpec::Wpda(p), &cle).unwrap();
    let g2 = twolevel::control::control(&GrammarSpec::Wpda(out.pda), &cle).unwrap();
    for s in ["abcd", "abc", "abdc"] {
        let w1 = oracle_stringsum_checked(&g1, &g1.tokenize(s).unwrap(), 30).unwrap();
        let w2 = oracle_stringsum_checked(&g2, &g2.tokenize(s).unwrap(), 30).unwrap();
        assert!(w1.1 && w2.1);
        assert_eq!(w1.0, w2.0, "{s}");
    }
}

#[test]
fn prepare_reports_residue() {
    let sr = Semiring::real();
    let nf = pda("controller pda init q S final q\nq , S -> q , A A\nq , A -> q , scan \"a\"\n", sr);
    let out = prepare_wpda(&nf).unwrap();
    assert!(out.residue.is_empty());
    assert_eq!(out.pda, nf);
    let p = pda("controller pda init q S final q\nq , S -> q , A\nq , A -> q ,\nq , A -> q , scan \"a\"\n", sr);
    let out = prepare_wpda(&p).unwrap();
    assert_eq!(out.residue.len(), 2);
    assert!(matches!(out.strict(), Err(twolevel::Error::NotNormalForm(v)) if v.len() == 2));
}

#[test]
fn pda_controller_pipeline() {
    let sr = Semiring::counting();
    let f = load_file(
        "formalism pc\ncontroller pda init q S final q\nq , S -> q , A A @ 1 scan \"l\"\nq , A -> q , scan \"m\"\n\ncontrollee ldcfg start X\nl : X -> *Y Z\nm : Y -> 'a'\nm : Z -> 'b'\nl : Z -> 'c'\n",
        &sr,
    )
    .unwrap();
    let conv = nf_convert_two_level(&f.controller, &f.controllee).unwrap();
    let g = merged(&f);
    for s in ["ab", "a", "b", "abb"] {
        let want = oracle_stringsum_checked(&g, &g.tokenize(s).unwrap(), 30).unwrap().0;
        assert_eq!(stringsum_str(&conv.nf, s).unwrap(), want, "{s}");
    }
}
