use twolevel::control::control;
use twolevel::grammar::load_file;
use twolevel::oracle::{derivations, enumerate, oracle_stringsum, replay};
use twolevel::semiring::{Semiring, Weight, Count};
use twolevel::twolevel::TwoLevelGrammar;

fn example(sr: Semiring) -> TwoLevelGrammar {
    let txt = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../grammars/anbncndn.tlg")).unwrap();
    let f = load_file(&txt, &sr).unwrap();
    control(&f.controller, &f.controllee).unwrap()
}

#[test]
fn example_language_up_to_eight() {
    let g = example(Semiring::counting());
    let en = enumerate(&g, 8, 40).unwrap();
    let got: Vec<String> = en.strings.iter().map(|(s, _)| g.render_string(s)).collect();
    assert_eq!(got, ["", "abcd", "aabbccdd"]);
    for (_, w) in &en.strings {
        assert_eq!(*w, Weight::Count(Count::Finite(1)));
    }
}

#[test]
fn example_stringsums() {
    let g = example(Semiring::counting());
    let s = g.tokenize("aabbccdd").unwrap();
    assert_eq!(oracle_stringsum(&g, &s, 40).unwrap(), Weight::Count(Count::Finite(1)));
    let s = g.tokenize("ab").unwrap();
    assert_eq!(oracle_stringsum(&g, &s, 40).unwrap(), Weight::Count(Count::Finite(0)));
}

#[test]
fn derivations_replay() {
    let g = example(Semiring::counting());
    let ds = derivations(&g, 8, 40, 100).unwrap();
    assert_eq!(ds.len(), 3);
    for d in &ds {
        let (s, w) = replay(&g, &d.rules).unwrap();
        assert_eq!(s, d.string);
        assert_eq!(w, d.weight);
    }
}
