//! Chart-based stringsums for normal-form two-level grammars.
//!
//! Items are pop computations. An ungapped item `⟨i,p X j,q A; e⟩` is the
//! weight of `X[e, A]` entered in controllee state `p` deriving `w[i..j]`
//! and leaving in `q`. A gapped item `⟨i,p X A l,s | j,q Y k,r; e,f⟩` is the
//! weight of `X[e, A ..]` deriving `w[i..j] Y[f, ..] w[k..l]`, where the
//! element `Y` inheriting the rest of the stack is entered in `q` and left
//! in `r`.
//!
//! The chart is filled in strata of increasing size, the number of
//! terminals outside the gap. Every antecedent of a rule is either of
//! strictly smaller size, or (for pops) an ungapped item of the same size,
//! so ungapped items of a size are computed before gapped ones and no
//! stratum needs an inner fixed point.

use std::collections::HashMap;

use crate::control::{NfGrammar, NfKind};
use crate::error::{Error, Result};
use crate::semiring::{Semiring, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UKey {
    pub x: u32,
    pub a: u32,
    pub e: u32,
    pub p: u32,
    pub q: u32,
}

/// Outer element `X[e, A ..]` from `p` to `s`; gap element `Y[f, ..]` from `q` to `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GKey {
    pub x: u32,
    pub a: u32,
    pub e: u32,
    pub f: u32,
    pub y: u32,
    pub p: u32,
    pub q: u32,
    pub r: u32,
    pub s: u32,
}

pub type Span2 = (usize, usize);
pub type Span4 = [usize; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ItemRef {
    U(Span2, UKey),
    G(Span4, GKey),
}

#[derive(Debug, Clone, Copy)]
enum Back {
    Term(usize),
    Eps(usize),
    PopLeft(usize, ItemRef),
    PopRight(usize, ItemRef),
    Push1(usize, ItemRef, ItemRef),
    Push2(usize, ItemRef, ItemRef),
}

/// A filled chart.
#[derive(Debug, Clone)]
pub struct Chart {
    pub n: usize,
    ungapped: HashMap<Span2, HashMap<UKey, Weight>>,
    gapped: HashMap<Span4, HashMap<GKey, Weight>>,
    back: Option<HashMap<ItemRef, Back>>,
    goal_key: UKey,
    goal: Weight,
}

impl Chart {
    pub fn goal(&self) -> Weight {
        self.goal
    }

    pub fn ungapped(&self, i: usize, j: usize, key: &UKey) -> Option<Weight> {
        self.ungapped.get(&(i, j)).and_then(|m| m.get(key)).copied()
    }

    pub fn gapped(&self, span: Span4, key: &GKey) -> Option<Weight> {
        self.gapped.get(&span).and_then(|m| m.get(key)).copied()
    }

    pub fn ungapped_count(&self) -> usize {
        self.ungapped.values().map(HashMap::len).sum()
    }

    pub fn gapped_count(&self) -> usize {
        self.gapped.values().map(HashMap::len).sum()
    }

    /// All ungapped items, sorted.
    pub fn ungapped_items(&self) -> Vec<(Span2, UKey, Weight)> {
        let mut v: Vec<_> = self
            .ungapped
            .iter()
            .flat_map(|(sp, m)| m.iter().map(move |(k, w)| (*sp, *k, *w)))
            .collect();
        v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        v
    }

    /// All gapped items, sorted.
    pub fn gapped_items(&self) -> Vec<(Span4, GKey, Weight)> {
        let mut v: Vec<_> = self
            .gapped
            .iter()
            .flat_map(|(sp, m)| m.iter().map(move |(k, w)| (*sp, *k, *w)))
            .collect();
        v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        v
    }

    /// Checks `0 ≤ i ≤ j ≤ k ≤ l ≤ n` for every item.
    pub fn check_positions(&self) -> std::result::Result<(), String> {
        for &(i, j) in self.ungapped.keys() {
            if i > j || j > self.n {
                return Err(format!("ungapped item with span ({i}, {j}) in a chart of length {}", self.n));
            }
        }
        for &[i, j, k, l] in self.gapped.keys() {
            if !(i <= j && j <= k && k <= l && l <= self.n) {
                return Err(format!(
                    "gapped item with positions ({i}, {j}, {k}, {l}) in a chart of length {}",
                    self.n
                ));
            }
        }
        Ok(())
    }
}

/// Upper bound on the number of gapped items for an input of length `n`:
/// `n⁴·|controller symbols|·|controllee symbols|²·|controllee states|⁴·|controller states|²`.
pub fn gapped_item_bound(g: &NfGrammar, n: usize) -> u128 {
    let gr = &g.grammar;
    let n = n as u128;
    let x1 = gr.sym.ctrl.len() as u128;
    let x2 = gr.sym.cle.len() as u128;
    let q1 = gr.ctrl_state_count() as u128;
    let q2 = gr.cle_state_count() as u128;
    n.pow(4) * x1 * x2 * x2 * q2.pow(4) * q1 * q1
}

struct PushRule {
    idx: usize,
    a: u32,
    e: u32,
    c: u32,
    w: Weight,
}

struct Filler<'a> {
    g: &'a NfGrammar,
    sr: Semiring,
    w: &'a [u32],
    chart: Chart,
    u_by_size: Vec<Vec<(Span2, UKey)>>,
    g_by_size: Vec<Vec<(Span4, GKey)>>,
    /// Gapped items by outer span and outer head: (i, l, X, A, e, p, s).
    g_by_outer: HashMap<(usize, usize, u32, u32, u32, u32, u32), Vec<(Span4, GKey)>>,
}

impl<'a> Filler<'a> {
    fn better(&self, old: Option<Weight>, new: Weight) -> bool {
        match old {
            None => true,
            Some(o) => self.sr.add(o, new) != o,
        }
    }

    fn add_u(&mut self, span: Span2, key: UKey, w: Weight, back: Back) {
        if self.sr.is_zero(w) {
            return;
        }
        let size = span.1 - span.0;
        let m = self.chart.ungapped.entry(span).or_default();
        let old = m.get(&key).copied();
        let new = match old {
            None => {
                self.u_by_size[size].push((span, key));
                w
            }
            Some(o) => self.sr.add(o, w),
        };
        m.insert(key, new);
        if self.chart.back.is_some() && self.better(old, w) {
            self.chart.back.as_mut().unwrap().insert(ItemRef::U(span, key), back);
        }
    }

    fn add_g(&mut self, span: Span4, key: GKey, w: Weight, back: Back) {
        if self.sr.is_zero(w) {
            return;
        }
        let [i, j, k, l] = span;
        let size = (j - i) + (l - k);
        let m = self.chart.gapped.entry(span).or_default();
        let old = m.get(&key).copied();
        let new = match old {
            None => {
                self.g_by_size[size].push((span, key));
                self.g_by_outer
                    .entry((i, l, key.x, key.a, key.e, key.p, key.s))
                    .or_default()
                    .push((span, key));
                w
            }
            Some(o) => self.sr.add(o, w),
        };
        m.insert(key, new);
        if self.chart.back.is_some() && self.better(old, w) {
            self.chart.back.as_mut().unwrap().insert(ItemRef::G(span, key), back);
        }
    }

    fn fill(&mut self) {
        let g = self.g;
        let gr = &g.grammar;
        let n = self.w.len();
        let sr = self.sr;

        let mut push_idx: HashMap<(u32, u32, u32, u32), Vec<PushRule>> = HashMap::new();
        let mut pop_left: HashMap<u32, Vec<usize>> = HashMap::new();
        let mut pop_right: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        let mut terms: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, r) in g.rules.iter().enumerate() {
            match r.kind {
                NfKind::Push { b, c } => push_idx.entry((r.x, r.f, b, r.p)).or_default().push(PushRule {
                    idx: i,
                    a: r.a,
                    e: r.e,
                    c,
                    w: r.weight,
                }),
                NfKind::PopLeft { z, .. } => pop_left.entry(z).or_default().push(i),
                NfKind::PopRight { y, .. } => pop_right.entry((y, r.q)).or_default().push(i),
                NfKind::Term(t) => terms.entry(t).or_default().push(i),
                NfKind::Eps => {}
            }
        }

        if n == 0 {
            for (i, r) in g.rules.iter().enumerate() {
                if r.kind == NfKind::Eps {
                    self.add_u((0, 0), self.chart.goal_key, r.weight, Back::Eps(i));
                }
            }
        }

        let states: Vec<u32> = gr.sym.cle_states.ids().collect();
        for d in 1..=n {
            if d == 1 {
                for (i, t) in self.w.iter().enumerate() {
                    for &ri in terms.get(t).into_iter().flatten() {
                        let r = &g.rules[ri];
                        let key = UKey {
                            x: r.x,
                            a: r.a,
                            e: r.e,
                            p: r.p,
                            q: r.q,
                        };
                        self.add_u((i, i + 1), key, r.weight, Back::Term(ri));
                    }
                }
            }

            // push-2: ⟨i,p X B l,t | j,q Y k,r; f,g⟩ ⊗ ⟨j,q Y k,r C; g⟩.
            for d1 in 1..d {
                for idx in 0..self.g_by_size[d1].len() {
                    let (span @ [i, j, k, l], k1) = self.g_by_size[d1][idx];
                    if k - j != d - d1 {
                        continue;
                    }
                    let Some(rules) = push_idx.get(&(k1.x, k1.e, k1.a, k1.p)) else {
                        continue;
                    };
                    let w1 = self.chart.gapped(span, &k1).unwrap();
                    for pr in rules {
                        let k2 = UKey {
                            x: k1.y,
                            a: pr.c,
                            e: k1.f,
                            p: k1.q,
                            q: k1.r,
                        };
                        let Some(w2) = self.chart.ungapped(j, k, &k2) else {
                            continue;
                        };
                        let key = UKey {
                            x: k1.x,
                            a: pr.a,
                            e: pr.e,
                            p: k1.p,
                            q: k1.s,
                        };
                        let w = sr.mul(sr.mul(pr.w, w1), w2);
                        self.add_u(
                            (i, l),
                            key,
                            w,
                            Back::Push2(pr.idx, ItemRef::G(span, k1), ItemRef::U((j, k), k2)),
                        );
                    }
                }
            }

            // Pops from fresh-started ungapped items of this size.
            for idx in 0..self.u_by_size[d].len() {
                let ((i0, j0), uk) = self.u_by_size[d][idx];
                if uk.a != gr.ctrl_start || uk.e != gr.ctrl_init {
                    continue;
                }
                let wu = self.chart.ungapped(i0, j0, &uk).unwrap();
                let uref = ItemRef::U((i0, j0), uk);
                for &ri in pop_left.get(&uk.x).into_iter().flatten() {
                    let r = &g.rules[ri];
                    let NfKind::PopLeft { y, .. } = r.kind else { unreachable!() };
                    let key = GKey {
                        x: r.x,
                        a: r.a,
                        e: r.e,
                        f: r.f,
                        y,
                        p: r.p,
                        q: r.q,
                        r: uk.p,
                        s: uk.q,
                    };
                    let w = sr.mul(r.weight, wu);
                    for i in 0..=i0 {
                        self.add_g([i, i, i0, j0], key, w, Back::PopLeft(ri, uref));
                    }
                }
                for &ri in pop_right.get(&(uk.x, uk.p)).into_iter().flatten() {
                    let r = &g.rules[ri];
                    let NfKind::PopRight { z, .. } = r.kind else { unreachable!() };
                    let w = sr.mul(r.weight, wu);
                    for k in j0..=n {
                        for &s in &states {
                            let key = GKey {
                                x: r.x,
                                a: r.a,
                                e: r.e,
                                f: r.f,
                                y: z,
                                p: r.p,
                                q: uk.q,
                                r: s,
                                s,
                            };
                            self.add_g([i0, j0, k, k], key, w, Back::PopRight(ri, uref));
                        }
                    }
                }
            }

            // push-1: ⟨i,q X B o,v | j,r Y m,u; f,g⟩ ⊗ ⟨j,r Y C m,u | k,s Z l,t; g,h⟩.
            for d1 in 1..d {
                let d2 = d - d1;
                for idx in 0..self.g_by_size[d1].len() {
                    let (span1 @ [i, j, m, o], k1) = self.g_by_size[d1][idx];
                    let Some(rules) = push_idx.get(&(k1.x, k1.e, k1.a, k1.p)) else {
                        continue;
                    };
                    let w1 = self.chart.gapped(span1, &k1).unwrap();
                    for pr in rules {
                        let Some(cands) = self.g_by_outer.get(&(j, m, k1.y, pr.c, k1.f, k1.q, k1.r)) else {
                            continue;
                        };
                        let cands: Vec<(Span4, GKey)> = cands
                            .iter()
                            .filter(|([a, b, c, e], _)| (b - a) + (e - c) == d2)
                            .copied()
                            .collect();
                        for (span2 @ [_, k, l, _], k2) in cands {
                            let w2 = self.chart.gapped(span2, &k2).unwrap();
                            let key = GKey {
                                x: k1.x,
                                a: pr.a,
                                e: pr.e,
                                f: k2.f,
                                y: k2.y,
                                p: k1.p,
                                q: k2.q,
                                r: k2.r,
                                s: k1.s,
                            };
                            let w = sr.mul(sr.mul(pr.w, w1), w2);
                            self.add_g(
                                [i, k, l, o],
                                key,
                                w,
                                Back::Push1(pr.idx, ItemRef::G(span1, k1), ItemRef::G(span2, k2)),
                            );
                        }
                    }
                }
            }
        }
        self.chart.goal = self
            .chart
            .ungapped(0, n, &self.chart.goal_key)
            .unwrap_or(sr.zero());
    }
}

fn check_input(g: &NfGrammar, input: &[u32]) -> Result<()> {
    let nt = g.grammar.sym.terminals.len() as u32;
    if let Some(t) = input.iter().find(|&&t| t >= nt) {
        return Err(Error::Input(format!("token id {t} is not a terminal of the grammar")));
    }
    Ok(())
}

fn run(g: &NfGrammar, input: &[u32], backpointers: bool) -> Result<Chart> {
    check_input(g, input)?;
    let gr = &g.grammar;
    let n = input.len();
    let chart = Chart {
        n,
        ungapped: HashMap::new(),
        gapped: HashMap::new(),
        back: backpointers.then(HashMap::new),
        goal_key: UKey {
            x: gr.start,
            a: gr.ctrl_start,
            e: gr.ctrl_init,
            p: gr.cle_init,
            q: gr.cle_final,
        },
        goal: gr.semiring.zero(),
    };
    let mut f = Filler {
        g,
        sr: gr.semiring,
        w: input,
        chart,
        u_by_size: vec![Vec::new(); n + 1],
        g_by_size: vec![Vec::new(); n + 1],
        g_by_outer: HashMap::new(),
    };
    f.fill();
    Ok(f.chart)
}

/// Fills the chart for `input` (token ids of the grammar's terminals).
pub fn fill_chart(g: &NfGrammar, input: &[u32]) -> Result<Chart> {
    run(g, input, false)
}

/// Total weight of all derivations of `input`.
pub fn stringsum(g: &NfGrammar, input: &[u32]) -> Result<Weight> {
    Ok(fill_chart(g, input)?.goal())
}

/// [`stringsum`] on a string, tokenized by [`crate::twolevel::TwoLevelGrammar::tokenize`].
pub fn stringsum_str(g: &NfGrammar, input: &str) -> Result<Weight> {
    let toks = g.grammar.tokenize(input).map_err(Error::Input)?;
    stringsum(g, &toks)
}

/// A best derivation: merged-rule indices in leftmost order.
#[derive(Debug, Clone, PartialEq)]
pub struct BestDerivation {
    pub weight: Weight,
    pub rules: Vec<usize>,
}

fn trace_u(chart: &Chart, it: ItemRef, out: &mut Vec<usize>) {
    match chart.back.as_ref().unwrap()[&it] {
        Back::Term(r) | Back::Eps(r) => out.push(r),
        Back::Push2(r, g1, u2) => {
            out.push(r);
            let (before, after) = trace_g(chart, g1);
            out.extend(before);
            trace_u(chart, u2, out);
            out.extend(after);
        }
        b => unreachable!("ungapped item with backpointer {b:?}"),
    }
}

fn trace_g(chart: &Chart, it: ItemRef) -> (Vec<usize>, Vec<usize>) {
    match chart.back.as_ref().unwrap()[&it] {
        Back::PopLeft(r, u) => {
            let mut after = Vec::new();
            trace_u(chart, u, &mut after);
            (vec![r], after)
        }
        Back::PopRight(r, u) => {
            let mut before = vec![r];
            trace_u(chart, u, &mut before);
            (before, Vec::new())
        }
        Back::Push1(r, g1, g2) => {
            let (b1, a1) = trace_g(chart, g1);
            let (b2, a2) = trace_g(chart, g2);
            let mut before = vec![r];
            before.extend(b1);
            before.extend(b2);
            let mut after = a2;
            after.extend(a1);
            (before, after)
        }
        b => unreachable!("gapped item with backpointer {b:?}"),
    }
}

/// One maximum-weight derivation of `input`, or `None` if there is none.
/// Requires an idempotent semiring.
pub fn best_derivation(g: &NfGrammar, input: &[u32]) -> Result<Option<BestDerivation>> {
    let sr = g.grammar.semiring;
    if !sr.is_idempotent() {
        return Err(Error::Unsupported(format!(
            "best derivations need an idempotent semiring, not {}",
            sr.name()
        )));
    }
    let chart = run(g, input, true)?;
    if sr.is_zero(chart.goal) {
        return Ok(None);
    }
    let mut rules = Vec::new();
    trace_u(&chart, ItemRef::U((0, chart.n), chart.goal_key), &mut rules);
    Ok(Some(BestDerivation {
        weight: chart.goal,
        rules,
    }))
}
