//! Brute-force derivation enumeration, the reference every other algorithm
//! is tested against.
//!
//! Expansion is memoized per element: an element `X[e, stack]` entered in
//! controllee state `p` expands to a multiset of (string, exit state, step
//! count). For normal-form grammars every stack symbol costs at least one
//! terminal, which bounds the search by string length alone. Other grammars
//! are bounded by derivation depth.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::control::is_nf;
use crate::error::{Error, Result};
use crate::semiring::{Semiring, Weight};
use crate::twolevel::{Elem, TwoLevelGrammar};

/// Environment variable overriding [`DEFAULT_NODE_CAP`].
pub const NODE_CAP_ENV: &str = "TLW_NODE_CAP";
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

/// Stack marker below which an element is frozen (used for pop computations).
const BOTTOM: u32 = u32::MAX;
/// Token ids at or above this value stand for gaps.
const GAP_BASE: u32 = 1 << 31;

/// Steps that always suffice for a normal-form derivation of a string of length `n`.
pub fn step_bound(n: usize) -> usize {
    8 * (n + 1)
}

pub fn node_cap_from_env() -> usize {
    std::env::var(NODE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_NODE_CAP)
}

/// Result of [`enumerate`]: aggregated weights per string, sorted by
/// length and then by token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub strings: Vec<(Vec<u32>, Weight)>,
    /// No derivation was cut off by the step bound.
    pub complete: bool,
    pub nodes: usize,
}

impl Enumeration {
    pub fn weight_of(&self, s: &[u32]) -> Option<Weight> {
        self.strings.iter().find(|(t, _)| t == s).map(|(_, w)| *w)
    }
}

/// The gap left by a frozen element: `Y[f, ..]` entered in state `q`, left in state `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gap {
    pub y: u32,
    pub f: u32,
    pub q: u32,
    pub r: u32,
}

#[derive(Clone)]
enum Child {
    Term(u32),
    El(u32, u32, Vec<u32>),
}

type Key = (u32, u32, Vec<u32>, u32, usize, usize);
type Entry = (Vec<u32>, u32, usize, Weight);

struct Engine<'a> {
    g: &'a TwoLevelGrammar,
    sr: Semiring,
    nf: bool,
    by_head: HashMap<(u32, u32, u32, u32), Vec<usize>>,
    memo: HashMap<Key, Rc<Vec<Entry>>>,
    active: HashSet<Key>,
    target: Option<Vec<u32>>,
    gaps: Vec<Gap>,
    gap_ids: HashMap<Gap, u32>,
    nodes: usize,
    cap: usize,
    truncated: bool,
}

fn is_sub(hay: &[u32], needle: &[u32]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

impl<'a> Engine<'a> {
    fn new(g: &'a TwoLevelGrammar, nf: bool) -> Engine<'a> {
        let mut by_head: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, r) in g.rules.iter().enumerate() {
            by_head.entry((r.x, r.e, r.a, r.p)).or_default().push(i);
        }
        Engine {
            g,
            sr: g.semiring,
            nf,
            by_head,
            memo: HashMap::new(),
            active: HashSet::new(),
            target: None,
            gaps: Vec::new(),
            gap_ids: HashMap::new(),
            nodes: 0,
            cap: node_cap_from_env(),
            truncated: false,
        }
    }

    fn gap_token(&mut self, gap: Gap) -> u32 {
        if let Some(&t) = self.gap_ids.get(&gap) {
            return t;
        }
        let t = GAP_BASE + self.gaps.len() as u32;
        self.gaps.push(gap);
        self.gap_ids.insert(gap, t);
        t
    }

    fn len(s: &[u32]) -> usize {
        s.iter().filter(|&&t| t < GAP_BASE).count()
    }

    fn need(&self, c: &Child) -> usize {
        match c {
            Child::Term(_) => 1,
            Child::El(_, _, st) if self.nf => st.iter().filter(|&&a| a != BOTTOM).count(),
            Child::El(..) => 0,
        }
    }

    fn children(&self, rule: usize, stack: &[u32]) -> Vec<Child> {
        let g = self.g;
        g.rules[rule]
            .rhs
            .iter()
            .map(|el| match el {
                Elem::Term(t) => Child::Term(*t),
                Elem::Fresh(y) => Child::El(*y, g.ctrl_init, vec![g.ctrl_start]),
                Elem::Dist { y, f, push } => {
                    let mut st = push.clone();
                    st.extend_from_slice(&stack[1..]);
                    Child::El(*y, *f, st)
                }
            })
            .collect()
    }

    fn expand(&mut self, x: u32, e: u32, stack: &[u32], p: u32, r: usize, b: usize) -> Result<Rc<Vec<Entry>>> {
        if stack.is_empty() {
            return Ok(Rc::new(Vec::new()));
        }
        if stack[0] == BOTTOM {
            let mut out = Vec::new();
            for s in self.g.sym.cle_states.ids().collect::<Vec<_>>() {
                let t = self.gap_token(Gap { y: x, f: e, q: p, r: s });
                out.push((vec![t], s, 0, self.sr.one()));
            }
            return Ok(Rc::new(out));
        }
        let b = if self.nf { 0 } else { b };
        let key: Key = (x, e, stack.to_vec(), p, r, b);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if !self.active.insert(key.clone()) {
            return Err(Error::Invalid("oracle expansion revisited an element it is still expanding".into()));
        }
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::ResourceExceeded(format!(
                "oracle search exceeded {} nodes (set {NODE_CAP_ENV} to raise the cap)",
                self.cap
            )));
        }
        let rules = self.by_head.get(&(x, e, stack[0], p)).cloned().unwrap_or_default();
        let mut acc: HashMap<(Vec<u32>, u32, usize), Weight> = HashMap::new();
        for ri in rules {
            let rule = &self.g.rules[ri];
            if rule.dist().is_none() && stack.len() != 1 {
                continue;
            }
            if !self.nf && b == 0 {
                self.truncated = true;
                break;
            }
            let ch = self.children(ri, stack);
            // A child with an empty controller stack derives nothing.
            if ch.iter().any(|c| matches!(c, Child::El(_, _, st) if st.is_empty())) {
                continue;
            }
            let (q, w) = (rule.q, rule.weight);
            self.seq(&ch, q, r, b.saturating_sub(1), Vec::new(), 1, w, &mut acc)?;
        }
        let mut out: Vec<Entry> = acc.into_iter().map(|((s, q, st), w)| (s, q, st, w)).collect();
        out.sort_by(|a, b| (a.0.len(), &a.0, a.1, a.2).cmp(&(b.0.len(), &b.0, b.1, b.2)));
        let out = Rc::new(out);
        self.active.remove(&key);
        self.memo.insert(key, out.clone());
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn seq(
        &mut self,
        ch: &[Child],
        state: u32,
        r: usize,
        b: usize,
        s: Vec<u32>,
        steps: usize,
        w: Weight,
        acc: &mut HashMap<(Vec<u32>, u32, usize), Weight>,
    ) -> Result<()> {
        let Some((first, rest)) = ch.split_first() else {
            let slot = acc.entry((s, state, steps)).or_insert(self.sr.zero());
            *slot = self.sr.add(*slot, w);
            return Ok(());
        };
        let rest_need: usize = rest.iter().map(|c| self.need(c)).sum();
        if rest_need + self.need(first) > r {
            return Ok(());
        }
        let avail = r - rest_need;
        match first {
            Child::Term(t) => {
                if avail == 0 {
                    return Ok(());
                }
                let mut s2 = s;
                s2.push(*t);
                if let Some(tg) = &self.target {
                    if !is_sub(tg, &s2) {
                        return Ok(());
                    }
                }
                self.seq(rest, state, r - 1, b, s2, steps, w, acc)
            }
            Child::El(y, f, st) => {
                let results = self.expand(*y, *f, st, state, avail, b)?;
                for (sub, q, st2, w2) in results.iter() {
                    let w3 = self.sr.mul(w, *w2);
                    if self.sr.is_zero(w3) {
                        continue;
                    }
                    let mut s2 = s.clone();
                    s2.extend_from_slice(sub);
                    if let Some(tg) = &self.target {
                        if !is_sub(tg, &s2) {
                            continue;
                        }
                    }
                    let used = Self::len(sub);
                    self.seq(rest, *q, r - used, b, s2, steps + st2, w3, acc)?;
                }
                Ok(())
            }
        }
    }

    /// Root expansion, filtered to accepting runs within `max_steps`.
    fn root(&mut self, max_len: usize, max_steps: usize) -> Result<HashMap<Vec<u32>, Weight>> {
        let g = self.g;
        let res = self.expand(g.start, g.ctrl_init, &[g.ctrl_start], g.cle_init, max_len, max_steps)?;
        let mut out: HashMap<Vec<u32>, Weight> = HashMap::new();
        for (s, q, steps, w) in res.iter() {
            if *q != g.cle_final {
                continue;
            }
            if *steps > max_steps {
                self.truncated = true;
                continue;
            }
            let slot = out.entry(s.clone()).or_insert(self.sr.zero());
            *slot = self.sr.add(*slot, *w);
        }
        Ok(out)
    }
}

fn sorted(map: HashMap<Vec<u32>, Weight>, sr: &Semiring) -> Vec<(Vec<u32>, Weight)> {
    let mut v: Vec<_> = map.into_iter().filter(|(_, w)| !sr.is_zero(*w)).collect();
    v.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
    v
}

/// All strings of length at most `max_len` with the aggregate weight of their
/// derivations of at most `max_steps` steps.
pub fn enumerate(g: &TwoLevelGrammar, max_len: usize, max_steps: usize) -> Result<Enumeration> {
    let mut en = Engine::new(g, is_nf(g));
    let map = en.root(max_len, max_steps)?;
    Ok(Enumeration {
        strings: sorted(map, &g.semiring),
        complete: !en.truncated,
        nodes: en.nodes,
    })
}

/// Total weight of the derivations of `s` with at most `max_steps` steps.
pub fn oracle_stringsum(g: &TwoLevelGrammar, s: &[u32], max_steps: usize) -> Result<Weight> {
    Ok(oracle_stringsum_checked(g, s, max_steps)?.0)
}

/// Like [`oracle_stringsum`], also reporting whether the search was complete.
pub fn oracle_stringsum_checked(g: &TwoLevelGrammar, s: &[u32], max_steps: usize) -> Result<(Weight, bool)> {
    let mut en = Engine::new(g, is_nf(g));
    en.target = Some(s.to_vec());
    let map = en.root(s.len(), max_steps)?;
    let w = map.get(s).copied().unwrap_or(g.semiring.zero());
    Ok((w, !en.truncated))
}

/// Sum over all derivations of at most `max_steps` steps. For a normal-form
/// grammar strings are capped at `max_steps` terminals, which every such
/// derivation respects.
pub fn oracle_allsum_truncated(g: &TwoLevelGrammar, max_steps: usize) -> Result<Weight> {
    let mut en = Engine::new(g, is_nf(g));
    let map = en.root(max_steps, max_steps)?;
    Ok(g.semiring.sum(map.values().copied()))
}

/// Directly enumerated derivations of `X[e, A]` from state `p`: each entry is
/// a terminal string, the exit state and the total weight.
pub fn ungapped_sums(
    g: &TwoLevelGrammar,
    (x, e, a, p): (u32, u32, u32, u32),
    max_len: usize,
) -> Result<Vec<(Vec<u32>, u32, Weight)>> {
    let mut en = Engine::new(g, true);
    let res = en.expand(x, e, &[a], p, max_len, 0)?;
    let mut map: HashMap<(Vec<u32>, u32), Weight> = HashMap::new();
    for (s, q, _, w) in res.iter() {
        let slot = map.entry((s.clone(), *q)).or_insert(g.semiring.zero());
        *slot = g.semiring.add(*slot, *w);
    }
    let mut v: Vec<_> = map.into_iter().map(|((s, q), w)| (s, q, w)).collect();
    v.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    Ok(v)
}

/// One enumerated pop computation class: `X[e, A ..]` entered in state `p`
/// derives `left`, then the element inheriting `..` (the gap), then `right`,
/// and exits in state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopSum {
    pub left: Vec<u32>,
    pub gap: Gap,
    pub right: Vec<u32>,
    pub s: u32,
    pub weight: Weight,
}

/// Directly enumerated pop computations of `X[e, A ..]` from state `p`, with
/// at most `max_len` terminals outside the gap. Requires a normal-form grammar.
pub fn pop_computation_sums(
    g: &TwoLevelGrammar,
    (x, e, a, p): (u32, u32, u32, u32),
    max_len: usize,
) -> Result<Vec<PopSum>> {
    let mut en = Engine::new(g, true);
    let res = en.expand(x, e, &[a, BOTTOM], p, max_len, 0)?;
    let mut map: HashMap<(Vec<u32>, Gap, Vec<u32>, u32), Weight> = HashMap::new();
    for (s, q, _, w) in res.iter() {
        let Some(pos) = s.iter().position(|&t| t >= GAP_BASE) else {
            continue;
        };
        let gap = en.gaps[(s[pos] - GAP_BASE) as usize];
        let key = (s[..pos].to_vec(), gap, s[pos + 1..].to_vec(), *q);
        let slot = map.entry(key).or_insert(g.semiring.zero());
        *slot = g.semiring.add(*slot, *w);
    }
    let mut v: Vec<PopSum> = map
        .into_iter()
        .map(|((left, gap, right, s), weight)| PopSum {
            left,
            gap,
            right,
            s,
            weight,
        })
        .collect();
    v.sort_by(|a, b| (&a.left, a.gap, &a.right, a.s).cmp(&(&b.left, b.gap, &b.right, b.s)));
    Ok(v)
}

/// A leftmost derivation: the rules applied, in order, to the leftmost element.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub rules: Vec<usize>,
    pub string: Vec<u32>,
    pub weight: Weight,
}

#[derive(Clone)]
struct Config {
    out: Vec<u32>,
    state: u32,
    /// Remaining sentential form, leftmost element last.
    rest: Vec<Child>,
}

fn step(g: &TwoLevelGrammar, c: &mut Config, rule: usize) -> bool {
    // Terminals in front of the leftmost element move to the output.
    while let Some(Child::Term(t)) = c.rest.last() {
        c.out.push(*t);
        c.rest.pop();
    }
    let Some(Child::El(x, e, stack)) = c.rest.pop() else {
        return false;
    };
    let r = &g.rules[rule];
    let fits = r.x == x
        && r.e == e
        && r.p == c.state
        && stack.first() == Some(&r.a)
        && (r.dist().is_some() || stack.len() == 1);
    if !fits {
        return false;
    }
    let en = Engine::new(g, false);
    let ch = en.children(rule, &stack);
    c.state = r.q;
    c.rest.extend(ch.into_iter().rev());
    true
}

fn flush(c: &mut Config) {
    while let Some(Child::Term(t)) = c.rest.last() {
        c.out.push(*t);
        c.rest.pop();
    }
}

fn root_config(g: &TwoLevelGrammar) -> Config {
    Config {
        out: Vec::new(),
        state: g.cle_init,
        rest: vec![Child::El(g.start, g.ctrl_init, vec![g.ctrl_start])],
    }
}

/// Replays a leftmost derivation, returning the derived string and weight.
pub fn replay(g: &TwoLevelGrammar, rules: &[usize]) -> Result<(Vec<u32>, Weight)> {
    let mut c = root_config(g);
    let mut w = g.semiring.one();
    for (i, &r) in rules.iter().enumerate() {
        if r >= g.rules.len() || !step(g, &mut c, r) {
            return Err(Error::Input(format!("step {} (rule {r}) does not apply", i + 1)));
        }
        w = g.semiring.mul(w, g.rules[r].weight);
    }
    flush(&mut c);
    if !c.rest.is_empty() || c.state != g.cle_final {
        return Err(Error::Input("derivation does not end in a terminal string".into()));
    }
    Ok((c.out, w))
}

/// Explicit leftmost derivations, at most `limit` of them, of strings up to
/// `max_len` in at most `max_steps` steps. Meant for small grammars.
pub fn derivations(g: &TwoLevelGrammar, max_len: usize, max_steps: usize, limit: usize) -> Result<Vec<Derivation>> {
    let nf = is_nf(g);
    let en = Engine::new(g, nf);
    let cap = node_cap_from_env();
    let mut out = Vec::new();
    let mut nodes = 0usize;
    let mut todo = vec![(root_config(g), Vec::new(), g.semiring.one())];
    while let Some((mut c, trace, w)) = todo.pop() {
        nodes += 1;
        if nodes > cap {
            return Err(Error::ResourceExceeded(format!("derivation search exceeded {cap} nodes")));
        }
        flush(&mut c);
        let need: usize = c.rest.iter().map(|ch| en.need(ch)).sum();
        if c.out.len() + need > max_len {
            continue;
        }
        let Some(Child::El(x, e, stack)) = c.rest.last().cloned() else {
            if c.state == g.cle_final && !g.semiring.is_zero(w) {
                out.push(Derivation {
                    rules: trace,
                    string: c.out,
                    weight: w,
                });
                if out.len() >= limit {
                    break;
                }
            }
            continue;
        };
        if trace.len() >= max_steps || stack.is_empty() {
            continue;
        }
        let rules = en.by_head.get(&(x, e, stack[0], c.state)).cloned().unwrap_or_default();
        for r in rules.into_iter().rev() {
            let mut c2 = c.clone();
            if step(g, &mut c2, r) {
                let mut t2 = trace.clone();
                t2.push(r);
                todo.push((c2, t2, g.semiring.mul(w, g.rules[r].weight)));
            }
        }
    }
    out.sort_by(|a, b| (a.string.len(), &a.string, &a.rules).cmp(&(b.string.len(), &b.string, &b.rules)));
    Ok(out)
}
