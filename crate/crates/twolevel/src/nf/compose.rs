//! Weighted label transducers and their composition with a controller.
//!
//! A controller in CNF without ε-rules behaves the same under its stack
//! semantics and its weighted label language, so controllee transformations
//! that rewrite whole label words can be pushed into the controller by
//! composing it with a transducer over labels.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::grammar::{FreshNames, Sym, Wcfg};
use crate::semiring::Weight;

/// One transducer move: reads a label, writes at most one label.
#[derive(Debug, Clone)]
pub(crate) struct Move {
    pub out: Option<String>,
    pub to: usize,
    pub weight: Weight,
}

/// A transducer over labels whose states are discovered from `init`.
pub(crate) struct Fst {
    pub names: Vec<String>,
    pub init: usize,
    pub finals: HashSet<usize>,
    pub moves: HashMap<(usize, String), Vec<Move>>,
}

impl Fst {
    /// Explores states reachable from the initial one. `step(state, label)`
    /// lists the moves; states are identified by a hashable key.
    pub fn explore<K, F>(init: K, labels: &[String], is_final: impl Fn(&K) -> bool, name: impl Fn(&K) -> String, mut step: F) -> Fst
    where
        K: Clone + Eq + std::hash::Hash,
        F: FnMut(&K, &str) -> Vec<(Option<String>, K, Weight)>,
    {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let mut keys: Vec<K> = Vec::new();
        let mut intern = |k: K, keys: &mut Vec<K>, queue: &mut VecDeque<usize>| -> usize {
            if let Some(&i) = ids.get(&k) {
                return i;
            }
            let i = keys.len();
            ids.insert(k.clone(), i);
            keys.push(k);
            queue.push_back(i);
            i
        };
        let mut queue = VecDeque::new();
        let init_id = intern(init, &mut keys, &mut queue);
        let mut moves: HashMap<(usize, String), Vec<Move>> = HashMap::new();
        while let Some(i) = queue.pop_front() {
            for l in labels {
                let k = keys[i].clone();
                for (out, to, weight) in step(&k, l) {
                    let to = intern(to, &mut keys, &mut queue);
                    moves.entry((i, l.clone())).or_default().push(Move { out, to, weight });
                }
            }
        }
        Fst {
            names: keys.iter().map(&name).collect(),
            init: init_id,
            finals: keys.iter().enumerate().filter(|(_, k)| is_final(k)).map(|(i, _)| i).collect(),
            moves,
        }
    }
}

/// Composes a CNF controller with a transducer: the result generates the
/// images of the controller's words, each weighted by the sum over runs.
/// The output is not in CNF; ε-rules come from moves that write nothing.
pub(crate) fn compose(ctrl: &Wcfg, fst: &Fst, fresh: &mut FreshNames) -> Wcfg {
    let sr = ctrl.semiring;
    // Productive triples (from, nonterminal, to).
    let mut by_from: HashMap<(usize, &str), Vec<usize>> = HashMap::new();
    let mut by_to: HashMap<(usize, &str), Vec<usize>> = HashMap::new();
    let mut productive: HashSet<(usize, &str, usize)> = HashSet::new();
    let mut queue: VecDeque<(usize, &str, usize)> = VecDeque::new();
    let mut leaf_rules: Vec<(usize, &str, usize, Option<String>, Weight)> = Vec::new();
    for r in &ctrl.rules {
        if let [Sym::T(l)] = r.rhs.as_slice() {
            for q in 0..fst.names.len() {
                for m in fst.moves.get(&(q, l.clone())).into_iter().flatten() {
                    leaf_rules.push((q, r.lhs.as_str(), m.to, m.out.clone(), sr.mul(r.weight, m.weight)));
                    queue.push_back((q, r.lhs.as_str(), m.to));
                }
            }
        }
    }
    let mut first: HashMap<&str, Vec<(&str, &str)>> = HashMap::new();
    let mut second: HashMap<&str, Vec<(&str, &str)>> = HashMap::new();
    for r in &ctrl.rules {
        if let [Sym::Nt(b), Sym::Nt(c)] = r.rhs.as_slice() {
            first.entry(b).or_default().push((r.lhs.as_str(), c.as_str()));
            second.entry(c).or_default().push((r.lhs.as_str(), b.as_str()));
        }
    }
    while let Some(t) = queue.pop_front() {
        if !productive.insert(t) {
            continue;
        }
        let (q, b, r) = t;
        by_from.entry((q, b)).or_default().push(r);
        by_to.entry((r, b)).or_default().push(q);
        for (a, c) in first.get(b).into_iter().flatten() {
            for &s in by_from.get(&(r, *c)).into_iter().flatten() {
                queue.push_back((q, a, s));
            }
        }
        for (a, c) in second.get(b).into_iter().flatten() {
            for &p in by_to.get(&(q, *c)).into_iter().flatten() {
                queue.push_back((p, a, r));
            }
        }
    }

    let mut names: HashMap<(usize, String, usize), String> = HashMap::new();
    let mut name = |t: (usize, &str, usize), fresh: &mut FreshNames| -> String {
        names
            .entry((t.0, t.1.to_string(), t.2))
            .or_insert_with(|| fresh.fresh(&format!("{}.{}.{}", t.1, t.0, t.2)))
            .clone()
    };
    let start = fresh.fresh(&ctrl.start);
    let mut out = Wcfg::new(sr, &start);
    for &f in &fst.finals {
        let t = (fst.init, ctrl.start.as_str(), f);
        if productive.contains(&t) {
            let n = name(t, fresh);
            out.add(&start, vec![Sym::Nt(n)], sr.one());
        }
    }
    for (q, a, r, o, w) in leaf_rules {
        let n = name((q, a, r), fresh);
        out.add(&n, o.into_iter().map(Sym::T).collect(), w);
    }
    for r in &ctrl.rules {
        if let [Sym::Nt(b), Sym::Nt(c)] = r.rhs.as_slice() {
            let mut triples = Vec::new();
            for (&(q, bb), mids) in &by_from {
                if bb != b {
                    continue;
                }
                for &m in mids {
                    for &s in by_from.get(&(m, c.as_str())).into_iter().flatten() {
                        triples.push((q, m, s));
                    }
                }
            }
            triples.sort_unstable();
            for (q, m, s) in triples {
                let lhs = name((q, r.lhs.as_str(), s), fresh);
                let rb = name((q, b.as_str(), m), fresh);
                let rc = name((m, c.as_str(), s), fresh);
                out.add(&lhs, vec![Sym::Nt(rb), Sym::Nt(rc)], r.weight);
            }
        }
    }
    super::cnf::trim_wcfg(&out)
}
