//! Weighted CFG utilities: nullable weights, unary closures and conversion to
//! Chomsky normal form. These work on the weighted language of the grammar,
//! so they apply equally to controllers, whose terminals are labels.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::allsum::{clamp, infinite};
use crate::error::{Error, Result};
use crate::grammar::{FreshNames, Sym, Wcfg};
use crate::semiring::{Semiring, SemiringKind, Weight, DEFAULT_TOLERANCE};

/// Sweep budget for the fixed-point solves in this module.
pub const FIXPOINT_SWEEPS: usize = 200_000;

fn check_solvable(sr: &Semiring) -> Result<()> {
    if sr.is_omega_continuous() || sr.is_idempotent() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "normalization needs an ω-continuous or idempotent semiring, not {}",
            sr.name()
        )))
    }
}

/// Least solution of `x = f(x)` by Kleene iteration from zero. Counting
/// values still growing after `n + 1` sweeps are infinite.
pub(crate) fn kleene<F>(sr: &Semiring, n: usize, f: F) -> Result<Vec<Weight>>
where
    F: Fn(&[Weight]) -> Vec<Weight>,
{
    let mut x = vec![sr.zero(); n];
    let mut frozen = vec![false; n];
    for sweep in 0..FIXPOINT_SWEEPS {
        let mut next: Vec<Weight> = f(&x).into_iter().map(clamp).collect();
        let mut changed = Vec::new();
        for i in 0..n {
            if frozen[i] {
                next[i] = x[i];
            } else if !sr.approx_eq(x[i], next[i], DEFAULT_TOLERANCE) {
                changed.push(i);
            }
        }
        x = next;
        if changed.is_empty() {
            return Ok(x);
        }
        if sr.kind() == SemiringKind::Counting && sweep > n + 1 {
            for i in changed {
                x[i] = infinite(sr);
                frozen[i] = true;
            }
        }
    }
    Err(Error::Diverged(format!(
        "fixed point did not converge within {FIXPOINT_SWEEPS} sweeps"
    )))
}

/// Weight of `X ⇒* ε` for every nonterminal `X`.
pub fn nullary_weights_wcfg(g: &Wcfg) -> Result<HashMap<String, Weight>> {
    let sr = g.semiring;
    check_solvable(&sr)?;
    let nts = g.nonterminals();
    let idx: HashMap<&str, usize> = nts.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let rules: Vec<(usize, Vec<usize>, Weight)> = g
        .rules
        .iter()
        .filter(|r| r.rhs.iter().all(Sym::is_nt))
        .map(|r| (idx[r.lhs.as_str()], r.rhs.iter().map(|s| idx[s.name()]).collect(), r.weight))
        .collect();
    let x = kleene(&sr, nts.len(), |x| {
        let mut out = vec![sr.zero(); x.len()];
        for (lhs, rhs, w) in &rules {
            let v = rhs.iter().fold(*w, |acc, &i| sr.mul(acc, x[i]));
            out[*lhs] = sr.add(out[*lhs], v);
        }
        out
    })?;
    Ok(nts.into_iter().zip(x).filter(|(_, w)| !sr.is_zero(*w)).collect())
}

/// Reflexive-transitive closure of a weighted relation by Lehmann's
/// algorithm: entry `(i, j)` sums all paths from `i` to `j`.
pub(crate) fn closure(sr: &Semiring, m: &[Vec<Weight>]) -> Result<Vec<Vec<Weight>>> {
    let n = m.len();
    let mut a = m.to_vec();
    for k in 0..n {
        let s = sr.star(a[k][k])?;
        let prev = a.clone();
        for i in 0..n {
            if sr.is_zero(prev[i][k]) {
                continue;
            }
            let left = sr.mul(prev[i][k], s);
            for j in 0..n {
                if !sr.is_zero(prev[k][j]) {
                    a[i][j] = clamp(sr.add(prev[i][j], sr.mul(left, prev[k][j])));
                }
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = sr.add(row[i], sr.one());
    }
    Ok(a)
}

/// Weight of `X ⇒* Y` through unary nonterminal rules, including the empty
/// chain. Only nonzero pairs are returned.
pub fn unary_chain_weights_wcfg(g: &Wcfg) -> Result<HashMap<(String, String), Weight>> {
    let sr = g.semiring;
    check_solvable(&sr)?;
    let nts = g.nonterminals();
    let idx: HashMap<&str, usize> = nts.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut m = vec![vec![sr.zero(); nts.len()]; nts.len()];
    for r in &g.rules {
        if let [Sym::Nt(b)] = r.rhs.as_slice() {
            let (i, j) = (idx[r.lhs.as_str()], idx[b.as_str()]);
            m[i][j] = sr.add(m[i][j], r.weight);
        }
    }
    let c = closure(&sr, &m)?;
    let mut out = HashMap::new();
    for (i, row) in c.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            if !sr.is_zero(*w) {
                out.insert((nts[i].clone(), nts[j].clone()), *w);
            }
        }
    }
    Ok(out)
}

/// Chomsky normal form: `S -> ε` only for a start symbol that occurs on no
/// right-hand side, otherwise `A -> a` and `A -> B C`.
pub fn is_cnf(g: &Wcfg) -> bool {
    let on_rhs = g.rules.iter().any(|r| r.rhs.iter().any(|s| s.name() == g.start && s.is_nt()));
    g.rules.iter().all(|r| match r.rhs.as_slice() {
        [] => r.lhs == g.start && !on_rhs,
        [Sym::T(_)] => true,
        [Sym::Nt(b), Sym::Nt(c)] => *b != g.start && *c != g.start,
        _ => false,
    })
}

/// Adds rules with identical sides together and drops zero-weight rules.
pub(crate) fn merge_duplicates(g: &mut Wcfg) {
    let sr = g.semiring;
    let mut pos: HashMap<(String, Vec<Sym>), usize> = HashMap::new();
    let mut out: Vec<crate::grammar::CfgRule> = Vec::new();
    for r in g.rules.drain(..) {
        match pos.get(&(r.lhs.clone(), r.rhs.clone())) {
            Some(&i) => out[i].weight = sr.add(out[i].weight, r.weight),
            None => {
                pos.insert((r.lhs.clone(), r.rhs.clone()), out.len());
                out.push(r);
            }
        }
    }
    out.retain(|r| !sr.is_zero(r.weight));
    g.rules = out;
}

/// Removes nonterminals that derive no terminal string or are unreachable
/// from the start symbol.
pub fn trim_wcfg(g: &Wcfg) -> Wcfg {
    let mut productive: HashSet<&str> = HashSet::new();
    loop {
        let before = productive.len();
        for r in &g.rules {
            if r.rhs.iter().all(|s| !s.is_nt() || productive.contains(s.name())) {
                productive.insert(&r.lhs);
            }
        }
        if productive.len() == before {
            break;
        }
    }
    let useful: Vec<&crate::grammar::CfgRule> = g
        .rules
        .iter()
        .filter(|r| productive.contains(r.lhs.as_str()) && r.rhs.iter().all(|s| !s.is_nt() || productive.contains(s.name())))
        .collect();
    let mut by_lhs: HashMap<&str, Vec<&crate::grammar::CfgRule>> = HashMap::new();
    for r in &useful {
        by_lhs.entry(r.lhs.as_str()).or_default().push(r);
    }
    let mut reach: HashSet<&str> = HashSet::new();
    let mut stack = vec![g.start.as_str()];
    while let Some(a) = stack.pop() {
        if !reach.insert(a) {
            continue;
        }
        for r in by_lhs.get(a).into_iter().flatten() {
            for s in &r.rhs {
                if s.is_nt() {
                    stack.push(s.name());
                }
            }
        }
    }
    let mut out = Wcfg::new(g.semiring, &g.start);
    out.terminals = g.terminals.clone();
    out.rules = useful
        .into_iter()
        .filter(|r| reach.contains(r.lhs.as_str()))
        .cloned()
        .collect();
    out
}

/// Converts a weighted CFG to an equivalent one in Chomsky normal form. The
/// weighted language is preserved; derivations are not.
pub fn cnf_convert_wcfg(g: &Wcfg) -> Result<Wcfg> {
    let sr = g.semiring;
    check_solvable(&sr)?;
    let mut fresh = FreshNames::new(g.all_names().iter().map(String::as_str));

    // New start symbol, then terminals out of long right-hand sides.
    let start = fresh.fresh(&format!("{}'", g.start));
    let mut h = g.clone();
    h.start = start.clone();
    h.add(&start, vec![Sym::Nt(g.start.clone())], sr.one());
    let mut wrapped: HashMap<String, String> = HashMap::new();
    let mut rules = Vec::new();
    let mut extra = Vec::new();
    for r in h.rules.drain(..) {
        if r.rhs.len() < 2 {
            rules.push(r);
            continue;
        }
        let rhs: Vec<Sym> = r
            .rhs
            .iter()
            .map(|s| match s {
                Sym::Nt(_) => s.clone(),
                Sym::T(t) => Sym::Nt(
                    wrapped
                        .entry(t.clone())
                        .or_insert_with(|| {
                            let n = fresh.fresh(&format!("T_{t}"));
                            extra.push((n.clone(), t.clone()));
                            n
                        })
                        .clone(),
                ),
            })
            .collect();
        rules.push(crate::grammar::CfgRule { rhs, ..r });
    }
    h.rules = rules;
    for (n, t) in extra {
        h.add(&n, vec![Sym::T(t)], sr.one());
    }

    // Binarize: A -> B1 B2 .. Bk becomes A -> B1 Z1, Z1 -> B2 Z2, ...
    let mut bin = Wcfg::new(sr, &start);
    bin.terminals = g.terminals.clone();
    for r in &h.rules {
        if r.rhs.len() <= 2 {
            bin.rules.push(r.clone());
            continue;
        }
        let mut lhs = r.lhs.clone();
        let mut w = r.weight;
        let k = r.rhs.len();
        for i in 0..k - 2 {
            let z = fresh.fresh(&format!("{}_{}", r.lhs, i + 1));
            bin.add(&lhs, vec![r.rhs[i].clone(), Sym::Nt(z.clone())], w);
            lhs = z;
            w = sr.one();
        }
        bin.add(&lhs, r.rhs[k - 2..].to_vec(), w);
    }

    // Remove ε-rules, folding nullable weights into shortened copies.
    let null = nullary_weights_wcfg(&bin)?;
    let nw = |s: &Sym| -> Option<Weight> {
        match s {
            Sym::Nt(n) => null.get(n).copied(),
            Sym::T(_) => None,
        }
    };
    let mut ne = Wcfg::new(sr, &start);
    ne.terminals = g.terminals.clone();
    for r in &bin.rules {
        match r.rhs.as_slice() {
            [] => {}
            [b, c] => {
                ne.rules.push(r.clone());
                if let Some(wb) = nw(b) {
                    ne.add(&r.lhs, vec![c.clone()], sr.mul(r.weight, wb));
                }
                if let Some(wc) = nw(c) {
                    ne.add(&r.lhs, vec![b.clone()], sr.mul(r.weight, wc));
                }
            }
            _ => ne.rules.push(r.clone()),
        }
    }
    merge_duplicates(&mut ne);

    // Remove unary chains.
    let unary = unary_chain_weights_wcfg(&ne)?;
    let mut from: BTreeMap<&str, Vec<(&str, Weight)>> = BTreeMap::new();
    for ((x, y), w) in &unary {
        from.entry(y.as_str()).or_default().push((x.as_str(), *w));
    }
    let mut out = Wcfg::new(sr, &start);
    out.terminals = g.terminals.clone();
    for r in &ne.rules {
        if matches!(r.rhs.as_slice(), [Sym::Nt(_)]) {
            continue;
        }
        for (x, w) in from.get(r.lhs.as_str()).into_iter().flatten() {
            out.add(x, r.rhs.clone(), clamp(sr.mul(*w, r.weight)));
        }
    }
    if let Some(w) = null.get(&start) {
        out.add(&start, vec![], *w);
    }
    merge_duplicates(&mut out);
    let out = trim_wcfg(&out);
    debug_assert!(is_cnf(&out));
    Ok(out)
}
