//! Allsums by Kleene iteration over pop-computation items.
//!
//! The solver works on any merged rule system, not only normal forms, so the
//! normal-form pipeline can use it on intermediate grammars. Items:
//!
//! * ungapped `⟨X, e, A, p, q⟩`: all derivations of `X[e, A]` entered in
//!   controllee state `p` and left in `q`;
//! * gapped `⟨X, e, A, p, s; W, g, b, c⟩`: all pop computations of
//!   `X[e, A ..]` from `p` to `s` whose gap `W[g, ..]` is entered in `b`
//!   and left in `c`.
//!
//! A rule `(p, X[e, A ..]) -> (q, α Y[f, β ..] ω)` contributes to a gapped
//! item by popping every symbol of `β` through a chain of gapped items, and
//! to an ungapped item by popping all but the last symbol of `β` and
//! deriving the last one completely.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::semiring::{Count, Semiring, SemiringKind, Weight, DEFAULT_TOLERANCE};
use crate::twolevel::{Elem, MergedRule, TwoLevelGrammar};

/// Real values above this are treated as divergent and frozen at ∞.
pub const INFINITY_THRESHOLD: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Every sweep reads the previous sweep's values.
    Jacobi,
    /// Items read values updated earlier in the same sweep.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub mode: SweepMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: 10_000,
            mode: SweepMode::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    /// No convergence within the sweep budget, or the goal is infinite. The
    /// reported values are lower bounds.
    Diverged,
}

type Head = (u32, u32, u32, u32);
/// Exit state, gap symbol, gap controller state, gap entry and exit states.
type Tail = (u32, u32, u32, u32, u32);

#[derive(Debug, Clone, Default, PartialEq)]
struct Vals {
    u: HashMap<Head, HashMap<u32, Weight>>,
    g: HashMap<Head, HashMap<Tail, Weight>>,
}

impl Vals {
    fn len(&self) -> usize {
        self.u.values().map(HashMap::len).sum::<usize>() + self.g.values().map(HashMap::len).sum::<usize>()
    }
}

/// An allsum item with its solved value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllsumItem {
    Ungapped {
        x: u32,
        e: u32,
        a: u32,
        p: u32,
        q: u32,
    },
    Gapped {
        x: u32,
        e: u32,
        a: u32,
        p: u32,
        s: u32,
        y: u32,
        f: u32,
        q: u32,
        r: u32,
    },
}

impl AllsumItem {
    /// Renders the item with the grammar's symbol names.
    pub fn render(&self, g: &TwoLevelGrammar) -> String {
        let cle_states = g.variant.controllee_is_pda();
        let ctrl_states = g.variant.controller_is_pda();
        let st = |p: u32| g.sym.cle_states.name(p).to_string();
        let head = |x: u32, e: u32, a: u32| {
            let (x, a) = (g.sym.cle.name(x), g.sym.ctrl.name(a));
            if ctrl_states {
                format!("{x}, {}, {a}", g.sym.ctrl_states.name(e))
            } else {
                format!("{x}, {a}")
            }
        };
        match *self {
            AllsumItem::Ungapped { x, e, a, p, q } => {
                if cle_states {
                    format!("⟨{}, {} → {}⟩", head(x, e, a), st(p), st(q))
                } else {
                    format!("⟨{}⟩", head(x, e, a))
                }
            }
            AllsumItem::Gapped {
                x,
                e,
                a,
                p,
                s,
                y,
                f,
                q,
                r,
            } => {
                let gap = if ctrl_states {
                    format!("{}, {}", g.sym.cle.name(y), g.sym.ctrl_states.name(f))
                } else {
                    g.sym.cle.name(y).to_string()
                };
                if cle_states {
                    format!("⟨{}, {} → {} | {gap}, {} → {}⟩", head(x, e, a), st(p), st(s), st(q), st(r))
                } else {
                    format!("⟨{} | {gap}⟩", head(x, e, a))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllsumReport {
    /// Value of the goal item `⟨S, init, S̄, init, final⟩`.
    pub value: Weight,
    pub outcome: Outcome,
    pub sweeps: usize,
    /// Item updates that decreased a value; always zero for a monotone system.
    pub monotonicity_violations: usize,
    /// Nonzero items, sorted.
    pub items: Vec<(AllsumItem, Weight)>,
}

impl AllsumReport {
    pub fn get(&self, item: &AllsumItem) -> Weight {
        self.items
            .iter()
            .find(|(i, _)| i == item)
            .map(|(_, w)| *w)
            .unwrap_or(match self.value {
                Weight::Bool(_) => Weight::Bool(false),
                Weight::Real(_) => Weight::Real(0.0),
                Weight::Count(_) => Weight::Count(Count::Finite(0)),
                Weight::Viterbi(_) => Weight::Viterbi(0.0),
            })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Converged => "converged",
            Outcome::Diverged => "diverged",
        })
    }
}

struct Solver<'a> {
    g: &'a TwoLevelGrammar,
    sr: Semiring,
    states: Vec<u32>,
    heads: Vec<(Head, Vec<usize>)>,
}

impl<'a> Solver<'a> {
    fn new(g: &'a TwoLevelGrammar) -> Solver<'a> {
        let mut by_head: HashMap<Head, Vec<usize>> = HashMap::new();
        for (i, r) in g.rules.iter().enumerate() {
            by_head.entry((r.x, r.e, r.a, r.p)).or_default().push(i);
        }
        let mut heads: Vec<_> = by_head.into_iter().collect();
        heads.sort();
        let states = (0..g.cle_state_count() as u32).collect();
        Solver {
            g,
            sr: g.semiring,
            states,
            heads,
        }
    }

    fn u(&self, v: &Vals, h: Head, q: u32) -> Weight {
        v.u.get(&h).and_then(|m| m.get(&q)).copied().unwrap_or(self.sr.zero())
    }

    /// Threads a state distribution through terminals and fresh children.
    fn thread(&self, v: &Vals, elems: &[Elem], mut cur: Vec<Weight>) -> Vec<Weight> {
        let g = self.g;
        for el in elems {
            match el {
                Elem::Term(_) => {}
                Elem::Fresh(z) => {
                    let mut next = vec![self.sr.zero(); cur.len()];
                    for (b, wb) in cur.iter().enumerate() {
                        if self.sr.is_zero(*wb) {
                            continue;
                        }
                        if let Some(m) = v.u.get(&(*z, g.ctrl_init, g.ctrl_start, b as u32)) {
                            for (&r, &wr) in m {
                                next[r as usize] = self.sr.add(next[r as usize], self.sr.mul(*wb, wr));
                            }
                        }
                    }
                    cur = next;
                }
                Elem::Dist { .. } => unreachable!("threading stops at the distinguished child"),
            }
        }
        cur
    }

    fn unit(&self, q: u32) -> Vec<Weight> {
        let mut v = vec![self.sr.zero(); self.states.len()];
        v[q as usize] = self.sr.one();
        v
    }

    /// Pops `syms` off chain tuples `(c0, W, g, b, c) -> weight`.
    fn pop_chain(&self, v: &Vals, mut chain: HashMap<Tail, Weight>, syms: &[u32]) -> HashMap<Tail, Weight> {
        for &sym in syms {
            let mut next: HashMap<Tail, Weight> = HashMap::new();
            for (&(c0, w, gs, b, c), &wt) in &chain {
                let Some(m) = v.g.get(&(w, gs, sym, b)) else {
                    continue;
                };
                for (&(s, w2, g2, b2, c2), &wv) in m {
                    if s != c {
                        continue;
                    }
                    let slot = next.entry((c0, w2, g2, b2, c2)).or_insert(self.sr.zero());
                    *slot = self.sr.add(*slot, self.sr.mul(wt, wv));
                }
            }
            chain = next;
        }
        chain
    }

    /// Adds the contributions of one rule to `out`.
    fn eval_rule(&self, v: &Vals, r: &MergedRule, out_u: &mut HashMap<u32, Weight>, out_g: &mut HashMap<Tail, Weight>) {
        let sr = self.sr;
        let Some((d, y, f, push)) = r.dist() else {
            let fin = self.thread(v, &r.rhs, self.unit(r.q));
            for (s, w) in fin.into_iter().enumerate() {
                if !sr.is_zero(w) {
                    let slot = out_u.entry(s as u32).or_insert(sr.zero());
                    *slot = sr.add(*slot, sr.mul(r.weight, w));
                }
            }
            return;
        };
        let pre = self.thread(v, &r.rhs[..d], self.unit(r.q));
        let suffix: Vec<Vec<Weight>> = self
            .states
            .iter()
            .map(|&c0| self.thread(v, &r.rhs[d + 1..], self.unit(c0)))
            .collect();
        let mut start: HashMap<Tail, Weight> = HashMap::new();
        for (b0, &wb) in pre.iter().enumerate() {
            if sr.is_zero(wb) {
                continue;
            }
            for &c0 in &self.states {
                start.insert((c0, y, f, b0 as u32, c0), wb);
            }
        }
        let emit = |c0: u32, w: Weight, add: &mut dyn FnMut(u32, Weight)| {
            for (s, &ws) in suffix[c0 as usize].iter().enumerate() {
                if !sr.is_zero(ws) {
                    add(s as u32, sr.mul(sr.mul(r.weight, w), ws));
                }
            }
        };
        // Gapped: pop every pushed symbol.
        let gaps = self.pop_chain(v, start.clone(), push);
        for (&(c0, w, gs, b, c), &wt) in &gaps {
            emit(c0, wt, &mut |s, x| {
                let slot = out_g.entry((s, w, gs, b, c)).or_insert(sr.zero());
                *slot = sr.add(*slot, x);
            });
        }
        // Ungapped: the last pushed symbol is derived completely.
        if let Some((&last, init)) = push.split_last() {
            let chain = self.pop_chain(v, start, init);
            for (&(c0, w, gs, b, c), &wt) in &chain {
                let wu = self.u(v, (w, gs, last, b), c);
                if sr.is_zero(wu) {
                    continue;
                }
                emit(c0, sr.mul(wt, wu), &mut |s, x| {
                    let slot = out_u.entry(s).or_insert(sr.zero());
                    *slot = sr.add(*slot, x);
                });
            }
        }
    }

    fn eval_head(&self, v: &Vals, rules: &[usize]) -> (HashMap<u32, Weight>, HashMap<Tail, Weight>) {
        let mut u = HashMap::new();
        let mut g = HashMap::new();
        for &ri in rules {
            self.eval_rule(v, &self.g.rules[ri], &mut u, &mut g);
        }
        (u, g)
    }
}

/// Clamps reals past [`INFINITY_THRESHOLD`] to ∞.
pub(crate) fn clamp(w: Weight) -> Weight {
    match w {
        Weight::Real(x) if x > INFINITY_THRESHOLD => Weight::Real(f64::INFINITY),
        Weight::Viterbi(x) if x > INFINITY_THRESHOLD => Weight::Viterbi(f64::INFINITY),
        _ => w,
    }
}

pub(crate) fn infinite(sr: &Semiring) -> Weight {
    match sr.kind() {
        SemiringKind::Real => Weight::Real(f64::INFINITY),
        SemiringKind::Viterbi => Weight::Viterbi(f64::INFINITY),
        SemiringKind::Counting => Weight::Count(Count::Inf),
        SemiringKind::Boolean => Weight::Bool(true),
    }
}

/// Compares two value maps. Returns (all items equal within tolerance,
/// number of decreases, keys that changed).
fn compare<K: std::hash::Hash + Eq + Copy>(
    sr: &Semiring,
    tol: f64,
    old: &HashMap<K, Weight>,
    new: &HashMap<K, Weight>,
    changed: &mut Vec<K>,
) -> usize {
    let zero = sr.zero();
    let mut decreases = 0;
    for (k, &n) in new {
        let o = old.get(k).copied().unwrap_or(zero);
        if !sr.approx_eq(o, n, tol) {
            changed.push(*k);
            if !sr.leq(o, n) {
                decreases += 1;
            }
        }
    }
    for (k, &o) in old {
        if !new.contains_key(k) && !sr.is_zero(o) {
            changed.push(*k);
            decreases += 1;
        }
    }
    decreases
}

/// Solves all items and reports the goal value.
pub fn allsum_items(g: &TwoLevelGrammar, cfg: &SolverConfig) -> Result<AllsumReport> {
    let sr = g.semiring;
    if !(sr.is_omega_continuous() || sr.is_idempotent()) {
        return Err(Error::Unsupported(format!(
            "allsums need an ω-continuous or idempotent semiring, not {}",
            sr.name()
        )));
    }
    if !(cfg.tolerance > 0.0) || cfg.max_sweeps == 0 {
        return Err(Error::Input("tolerance must be positive and max_sweeps at least 1".into()));
    }
    let solver = Solver::new(g);
    let mut vals = Vals::default();
    let mut sweeps = 0;
    let mut violations = 0;
    let mut converged = false;
    // Counting values still growing after this many sweeps are infinite.
    let mut promoted = false;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let snapshot = match cfg.mode {
            SweepMode::Jacobi => Some(vals.clone()),
            SweepMode::GaussSeidel => None,
        };
        let mut changed_u: Vec<(Head, u32)> = Vec::new();
        let mut changed_g: Vec<(Head, Tail)> = Vec::new();
        for (head, rules) in &solver.heads {
            let (mut nu, mut ng) = solver.eval_head(snapshot.as_ref().unwrap_or(&vals), rules);
            for w in nu.values_mut().chain(ng.values_mut()) {
                *w = clamp(*w);
            }
            nu.retain(|_, w| !sr.is_zero(*w));
            ng.retain(|_, w| !sr.is_zero(*w));
            // Infinite values stay infinite once promoted.
            if promoted {
                if let Some(old) = vals.u.get(head) {
                    for (k, w) in old {
                        if w.is_infinite() {
                            nu.insert(*k, *w);
                        }
                    }
                }
                if let Some(old) = vals.g.get(head) {
                    for (k, w) in old {
                        if w.is_infinite() {
                            ng.insert(*k, *w);
                        }
                    }
                }
            }
            let empty_u = HashMap::new();
            let empty_g = HashMap::new();
            let mut cu = Vec::new();
            let mut cg = Vec::new();
            violations += compare(&sr, cfg.tolerance, vals.u.get(head).unwrap_or(&empty_u), &nu, &mut cu);
            violations += compare(&sr, cfg.tolerance, vals.g.get(head).unwrap_or(&empty_g), &ng, &mut cg);
            changed_u.extend(cu.into_iter().map(|k| (*head, k)));
            changed_g.extend(cg.into_iter().map(|k| (*head, k)));
            vals.u.insert(*head, nu);
            vals.g.insert(*head, ng);
        }
        if changed_u.is_empty() && changed_g.is_empty() {
            converged = true;
            break;
        }
        if sr.kind() == SemiringKind::Counting && !promoted && sweeps > vals.len() + 1 {
            promoted = true;
            let inf = infinite(&sr);
            for (h, k) in changed_u {
                vals.u.entry(h).or_default().insert(k, inf);
            }
            for (h, k) in changed_g {
                vals.g.entry(h).or_default().insert(k, inf);
            }
        }
    }
    let goal = solver.u(&vals, (g.start, g.ctrl_init, g.ctrl_start, g.cle_init), g.cle_final);
    let outcome = if converged && !goal.is_infinite() {
        Outcome::Converged
    } else {
        Outcome::Diverged
    };
    let mut items: Vec<(AllsumItem, Weight)> = Vec::new();
    for (&(x, e, a, p), m) in &vals.u {
        for (&q, &w) in m {
            items.push((AllsumItem::Ungapped { x, e, a, p, q }, w));
        }
    }
    for (&(x, e, a, p), m) in &vals.g {
        for (&(s, y, f, q, r), &w) in m {
            items.push((
                AllsumItem::Gapped {
                    x,
                    e,
                    a,
                    p,
                    s,
                    y,
                    f,
                    q,
                    r,
                },
                w,
            ));
        }
    }
    items.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(AllsumReport {
        value: goal,
        outcome,
        sweeps,
        monotonicity_violations: violations,
        items,
    })
}

/// The allsum of the grammar.
pub fn allsum(g: &TwoLevelGrammar, cfg: &SolverConfig) -> Result<AllsumReport> {
    allsum_items(g, cfg)
}
