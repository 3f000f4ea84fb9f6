#![allow(dead_code)]

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use twolevel::control::{classify_nf, control, NfGrammar};
use twolevel::grammar::{load_file, GrammarFile, Variant};
use twolevel::semiring::{Count, Semiring, SemiringKind, Weight};
use twolevel::nf::nf_convert_two_level;
use twolevel::oracle::{oracle_stringsum, oracle_stringsum_checked};
use twolevel::stringsum::stringsum;
use twolevel::twolevel::TwoLevelGrammar;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn grammar_path(name: &str) -> String {
    format!("{}/../../grammars/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load_pair(path: &str, sr: Semiring) -> GrammarFile {
    let txt = std::fs::read_to_string(path).unwrap();
    load_file(&txt, &sr).unwrap()
}

pub fn merged(f: &GrammarFile) -> TwoLevelGrammar {
    control(&f.controller, &f.controllee).unwrap()
}

pub fn example(sr: Semiring) -> TwoLevelGrammar {
    merged(&load_pair(&grammar_path("anbncndn.tlg"), sr))
}

pub fn weight_text(rng: &mut ChaCha8Rng, kind: SemiringKind) -> String {
    match kind {
        SemiringKind::Real | SemiringKind::Viterbi => format!("{:.1}", rng.gen_range(1..=10) as f64 / 10.0),
        SemiringKind::Counting | SemiringKind::Boolean => "1".into(),
    }
}

/// All strings over `alphabet` up to length `max`, shortest first.
pub fn strings_up_to(alphabet: &[u32], max: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &layer {
            for &a in alphabet {
                let mut t: Vec<u32> = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub fn same_weight(a: Weight, b: Weight, tol: f64) -> bool {
    match (a, b) {
        (Weight::Real(x), Weight::Real(y)) | (Weight::Viterbi(x), Weight::Viterbi(y)) => {
            (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))
        }
        _ => a == b,
    }
}

/// Text of a random normal-form controller/controllee pair of the given
/// variant: at most 4 symbols and 2 states per side.
pub fn random_nf_text(rng: &mut ChaCha8Rng, variant: Variant, kind: SemiringKind) -> String {
    let ctrl_pda = variant.controller_is_pda();
    let cle_pda = variant.controllee_is_pda();
    let n1 = rng.gen_range(1..=4);
    let n2 = rng.gen_range(1..=4);
    let q1 = if ctrl_pda { rng.gen_range(1..=2) } else { 1 };
    let q2 = if cle_pda { rng.gen_range(1..=2) } else { 1 };
    let ctrl: Vec<String> = (0..n1).map(|i| if i == 0 { "S1".into() } else { format!("A{i}") }).collect();
    let cle: Vec<String> = (0..n2).map(|i| if i == 0 { "S".into() } else { format!("X{i}") }).collect();
    let cs: Vec<String> = (0..q1).map(|i| format!("c{i}")).collect();
    let ds: Vec<String> = (0..q2).map(|i| format!("d{i}")).collect();
    let terms = if rng.gen_bool(0.5) { &["a", "b"][..] } else { &["a"][..] };

    // Controllee productions: (label, text), and which labels carry no spine.
    let mut cle_lines = Vec::new();
    let mut spine_labels = Vec::new();
    let mut leaf_labels = Vec::new();
    // A small shared label pool: one label may drive productions of several symbols.
    let pool: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("l{i}")).collect();
    let nrules = n2 + rng.gen_range(2..=7);
    for i in 0..nrules {
        let label = ctrl_choice(rng, &pool);
        // Every controllee symbol gets at least one production.
        let x = if i < n2 { cle[i].clone() } else { ctrl_choice(rng, &cle) };
        let w = weight_text(rng, kind);
        let p = ctrl_choice(rng, &ds);
        // Staying in place keeps runs connected more often.
        let q = if rng.gen_bool(0.5) { p.clone() } else { ctrl_choice(rng, &ds) };
        let shape = if n2 > 1 && i >= n2 { rng.gen_range(0..3) } else { 0 };
        let (y, z) = (non_start(rng, &cle), non_start(rng, &cle));
        let body = match shape {
            0 => {
                leaf_labels.push(label.clone());
                let a = terms.choose(rng).unwrap();
                if cle_pda {
                    format!("{p} , {x} -> {q} , scan '{a}'")
                } else {
                    format!("{x} -> '{a}'")
                }
            }
            1 => {
                spine_labels.push(label.clone());
                if cle_pda {
                    format!("{p} , {x} -> {q} , *{y} {z}")
                } else {
                    format!("{x} -> *{y} {z}")
                }
            }
            _ => {
                spine_labels.push(label.clone());
                if cle_pda {
                    format!("{p} , {x} -> {q} , {y} *{z}")
                } else {
                    format!("{x} -> {y} *{z}")
                }
            }
        };
        cle_lines.push(format!("{label} : {body} @ {w}"));
    }
    let eps = rng.gen_bool(0.3);
    if eps {
        let w = weight_text(rng, kind);
        if cle_pda {
            cle_lines.push(format!("leps : {} , S -> {} , @ {w}", ds[0], ds[q2 - 1]));
        } else {
            cle_lines.push(format!("leps : S -> @ {w}"));
        }
    }

    let mut ctrl_lines = Vec::new();
    let final1 = &cs[q1 - 1];
    let nctrl = 2 * n1 + rng.gen_range(2..=6);
    for i in 0..nctrl {
        let a = if i < n1 { ctrl[i].clone() } else { ctrl_choice(rng, &ctrl) };
        let w = weight_text(rng, kind);
        let e = ctrl_choice(rng, &cs);
        let f = if rng.gen_bool(0.5) { e.clone() } else { ctrl_choice(rng, &cs) };
        if n1 > 1 && i >= n1 && rng.gen_bool(0.6) {
            let (b, c) = (non_start(rng, &ctrl), non_start(rng, &ctrl));
            if ctrl_pda {
                ctrl_lines.push(format!("{e} , {a} -> {f} , {b} {c} @ {w}"));
            } else {
                ctrl_lines.push(format!("{a} -> {b} {c} @ {w}"));
            }
        } else {
            let l = ctrl_choice(rng, &pool);
            // Leaf productions only merge when the controller ends in its final state.
            let f = if rng.gen_bool(0.6) { final1.clone() } else { f };
            if ctrl_pda {
                ctrl_lines.push(format!("{e} , {a} -> {f} , @ {w} scan \"{l}\""));
            } else {
                ctrl_lines.push(format!("{a} -> \"{l}\" @ {w}"));
            }
        }
    }
    if eps {
        let w = weight_text(rng, kind);
        if ctrl_pda {
            ctrl_lines.push(format!("{} , S1 -> {final1} , @ {w} scan \"leps\"", cs[0]));
        } else {
            ctrl_lines.push(format!("S1 -> \"leps\" @ {w}"));
        }
    }

    let ctrl_head = if ctrl_pda {
        format!("controller pda init {} S1 final {final1}", cs[0])
    } else {
        "controller cfg start S1".into()
    };
    let cle_head = if cle_pda {
        format!("controllee ldpda init {} S final {}", ds[0], ds[q2 - 1])
    } else {
        "controllee ldcfg start S".into()
    };
    format!(
        "formalism {}\n{ctrl_head}\n{}\n\n{cle_head}\n{}\n",
        variant.name(),
        ctrl_lines.join("\n"),
        cle_lines.join("\n")
    )
}

fn ctrl_choice(rng: &mut ChaCha8Rng, v: &[String]) -> String {
    v.choose(rng).unwrap().clone()
}

fn non_start(rng: &mut ChaCha8Rng, v: &[String]) -> String {
    if v.len() == 1 {
        return v[0].clone();
    }
    v[1..].choose(rng).unwrap().clone()
}

/// A random normal-form grammar; also returns its source text.
pub fn random_nf(rng: &mut ChaCha8Rng, variant: Variant, kind: SemiringKind) -> (NfGrammar, String) {
    let txt = random_nf_text(rng, variant, kind);
    let f = load_file(&txt, &Semiring::new(kind)).unwrap_or_else(|e| panic!("{e}\n{txt}"));
    let g = control(&f.controller, &f.controllee).unwrap();
    let nf = classify_nf(g).unwrap_or_else(|e| panic!("{e}\n{txt}"));
    (nf, txt)
}

/// Like [`random_nf`], resampling until the grammar derives some non-empty
/// string of length at most `max_len`, so comparisons are not vacuous.
pub fn random_productive_nf(
    rng: &mut ChaCha8Rng,
    variant: Variant,
    kind: SemiringKind,
    max_len: usize,
) -> (NfGrammar, String) {
    loop {
        let (nf, txt) = random_nf(rng, variant, kind);
        let en = twolevel::oracle::enumerate(&nf.grammar, max_len, twolevel::oracle::step_bound(max_len)).unwrap();
        if en.strings.iter().any(|(s, _)| !s.is_empty()) {
            return (nf, txt);
        }
    }
}

/// Text of a random general CFG-controls-CFG pair: controller right-hand
/// sides of length 0 to 4 mixing labels and nonterminals (so ε and unary
/// rules occur), controllee productions of length 0 to 3 with an optional
/// distinguished child.
///
/// With `finite`, every string has finitely many derivations: label-free
/// controller rules only mention later nonterminals, and every non-empty
/// controllee production emits a terminal.
pub fn random_general_text(rng: &mut ChaCha8Rng, kind: SemiringKind, finite: bool) -> String {
    let n1 = rng.gen_range(1..=3);
    let n2 = rng.gen_range(1..=3);
    let ctrl: Vec<String> = (0..n1).map(|i| if i == 0 { "S1".into() } else { format!("A{i}") }).collect();
    let cle: Vec<String> = (0..n2).map(|i| if i == 0 { "S".into() } else { format!("X{i}") }).collect();
    let pool: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("l{i}")).collect();
    let terms = ["a", "b"];

    let mut ctrl_lines = Vec::new();
    for i in 0..n1 + rng.gen_range(1..=5) {
        let ai = if i < n1 { i } else { rng.gen_range(0..n1) };
        let a = ctrl[ai].clone();
        let len = *[0, 1, 1, 2, 2, 3, 4].choose(rng).unwrap();
        let mut rhs: Vec<String> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.6) {
                    format!("\"{}\"", ctrl_choice(rng, &pool))
                } else {
                    ctrl_choice(rng, &ctrl)
                }
            })
            .collect();
        if finite && !rhs.iter().any(|s| s.starts_with('"')) {
            // Label-free rules step down the symbol order.
            rhs = rhs.iter().filter_map(|_| (ai + 1 < n1).then(|| ctrl[rng.gen_range(ai + 1..n1)].clone())).collect();
        }
        if finite && rhs.first().is_some_and(|s| !s.starts_with('"')) {
            // So does a leading nonterminal: no left recursion.
            let lead = ctrl.iter().position(|c| *c == rhs[0]).unwrap();
            if lead <= ai {
                if ai + 1 < n1 {
                    rhs[0] = ctrl[rng.gen_range(ai + 1..n1)].clone();
                } else {
                    rhs[0] = format!("\"{}\"", ctrl_choice(rng, &pool));
                }
            }
        }
        ctrl_lines.push(format!("{a} -> {} @ {}", rhs.join(" "), weight_text(rng, kind)));
    }

    let mut cle_lines = Vec::new();
    for i in 0..n2 + rng.gen_range(1..=4) {
        let x = if i < n2 { cle[i].clone() } else { ctrl_choice(rng, &cle) };
        let len = *[0, 1, 1, 2, 2, 3].choose(rng).unwrap();
        let mut syms: Vec<(String, bool)> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    (format!("'{}'", terms.choose(rng).unwrap()), false)
                } else {
                    (ctrl_choice(rng, &cle), true)
                }
            })
            .collect();
        if finite && !syms.is_empty() && syms.iter().all(|s| s.1) {
            let k = rng.gen_range(0..syms.len());
            syms[k] = (format!("'{}'", terms.choose(rng).unwrap()), false);
        }
        let nts: Vec<usize> = (0..syms.len()).filter(|&k| syms[k].1).collect();
        if !nts.is_empty() && rng.gen_bool(0.7) {
            let d = *nts.choose(rng).unwrap();
            syms[d].0 = format!("*{}", syms[d].0);
        }
        let rhs: Vec<String> = syms.into_iter().map(|(s, _)| s).collect();
        cle_lines.push(format!(
            "{} : {x} -> {} @ {}",
            ctrl_choice(rng, &pool),
            rhs.join(" "),
            weight_text(rng, kind)
        ));
    }
    format!(
        "formalism cc\ncontroller cfg start S1\n{}\n\ncontrollee ldcfg start S\n{}\n",
        ctrl_lines.join("\n"),
        cle_lines.join("\n")
    )
}

/// Pairs whose short strings have finitely many derivations, so the oracle
/// on the source pair is exact, and which derive some string of length at
/// most `max_len`.
pub fn exact_general_pairs(seed: u64, kind: SemiringKind, want: usize, max_len: usize) -> Vec<(String, GrammarFile)> {
    let sr = Semiring::new(kind);
    let mut rng = rng(seed);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < want {
        tries += 1;
        assert!(tries < want * 200, "generator too sparse");
        let txt = random_general_text(&mut rng, kind, true);
        let f = load_file(&txt, &sr).unwrap_or_else(|e| panic!("{e}\n{txt}"));
        let g = merged(&f);
        let alphabet: Vec<u32> = g.sym.terminals.ids().collect();
        let mut exact = true;
        let mut nonzero = false;
        for s in strings_up_to(&alphabet, max_len) {
            let Ok((w, complete)) = oracle_stringsum_checked(&g, &s, GENERAL_STEPS) else {
                exact = false;
                break;
            };
            exact &= complete;
            nonzero |= !sr.is_zero(w);
            if !exact {
                break;
            }
        }
        if exact && nonzero {
            out.push((txt, f));
        }
    }
    out
}

/// Derivation-step budget for the oracle on source pairs.
pub const GENERAL_STEPS: usize = 24;

/// Converts random general pairs to normal form and compares every string
/// up to length 4 with the oracle on the source pair. Returns the number of
/// strings compared and how many of them had nonzero weight.
pub fn preservation_check(kind: SemiringKind, seed: u64, pairs: usize) -> Result<(usize, usize), String> {
    let sr = Semiring::new(kind);
    let mut compared = 0;
    let mut nonzero = 0;
    for (txt, f) in exact_general_pairs(seed, kind, pairs, 4) {
        let g = merged(&f);
        let conv = nf_convert_two_level(&f.controller, &f.controllee).map_err(|e| format!("{e}\n{txt}"))?;
        classify_nf(merged(&conv.file())).map_err(|e| format!("reclassifying: {e}\n{txt}"))?;
        let alphabet: Vec<u32> = g.sym.terminals.ids().collect();
        for s in strings_up_to(&alphabet, 4) {
            let want = oracle_stringsum(&g, &s, GENERAL_STEPS).map_err(|e| e.to_string())?;
            let text = g.render_string(&s);
            let got = match conv.nf.grammar.tokenize(&text) {
                Ok(t) => stringsum(&conv.nf, &t).map_err(|e| e.to_string())?,
                Err(_) => sr.zero(),
            };
            if !same_weight(want, got, 1e-9) {
                return Err(format!("{text:?}: oracle {want}, normal form {got}\n{txt}"));
            }
            compared += 1;
            nonzero += usize::from(!sr.is_zero(want));
        }
    }
    Ok((compared, nonzero))
}

/// Semiring instances covered by the axiom checks.
pub fn semiring_instances() -> Vec<(&'static str, Semiring)> {
    vec![
        ("boolean", Semiring::boolean()),
        ("real", Semiring::real()),
        ("viterbi", Semiring::viterbi()),
        ("counting", Semiring::counting()),
        ("counting capped at 1000", Semiring::counting_with_cap(1000)),
        ("naturals", Semiring::naturals()),
    ]
}

/// Weights for axiom checks. Reals are multiples of 1/8 so sums and
/// products of three stay exact; counts mix small values with ones large
/// enough to saturate.
pub fn weight_strategy(sr: Semiring) -> BoxedStrategy<Weight> {
    match sr.kind() {
        SemiringKind::Boolean => any::<bool>().prop_map(Weight::Bool).boxed(),
        SemiringKind::Real => prop_oneof![
            8 => (0u32..=64).prop_map(|k| Weight::Real(k as f64 / 8.0)),
            1 => Just(Weight::Real(f64::INFINITY)),
        ]
        .boxed(),
        SemiringKind::Viterbi => (0u32..=8).prop_map(|k| Weight::Viterbi(k as f64 / 8.0)).boxed(),
        SemiringKind::Counting => {
            let big = sr.count_cap().min(1 << 40);
            let mut parts: Vec<(u32, BoxedStrategy<Weight>)> = vec![
                (6, (0u64..50).prop_map(|n| Weight::Count(Count::Finite(n))).boxed()),
                (2, (big / 4..=big).prop_map(|n| Weight::Count(Count::Finite(n))).boxed()),
            ];
            if sr.is_omega_continuous() {
                parts.push((1, Just(Weight::Count(Count::Inf)).boxed()));
            }
            proptest::strategy::Union::new_weighted(parts).boxed()
        }
    }
}

/// The first semiring law broken by `a`, `b`, `c`, if any.
pub fn axiom_violation(sr: &Semiring, a: Weight, b: Weight, c: Weight) -> Option<String> {
    let (zero, one) = (sr.zero(), sr.one());
    let checks = [
        ("⊕ associative", sr.add(sr.add(a, b), c), sr.add(a, sr.add(b, c))),
        ("⊗ associative", sr.mul(sr.mul(a, b), c), sr.mul(a, sr.mul(b, c))),
        ("⊕ commutative", sr.add(a, b), sr.add(b, a)),
        ("⊗ commutative", sr.mul(a, b), sr.mul(b, a)),
        ("left distributive", sr.mul(a, sr.add(b, c)), sr.add(sr.mul(a, b), sr.mul(a, c))),
        ("right distributive", sr.mul(sr.add(b, c), a), sr.add(sr.mul(b, a), sr.mul(c, a))),
        ("⊕ identity", sr.add(a, zero), a),
        ("⊗ left identity", sr.mul(one, a), a),
        ("⊗ right identity", sr.mul(a, one), a),
        ("left absorption", sr.mul(zero, a), zero),
        ("right absorption", sr.mul(a, zero), zero),
    ];
    checks
        .iter()
        .find(|(_, l, r)| l != r)
        .map(|(law, l, r)| format!("{law} fails in {} on {a}, {b}, {c}: {l} vs {r}", sr.name()))
}
