//! Controllee transformations for a CFG controlling a CFG.
//!
//! Each step rewrites the controllee and compensates in the controller,
//! either by substituting label words or by composing the controller with a
//! label transducer. The controller is expected in CNF without ε-rules,
//! where its stack semantics and its weighted label language agree.

use std::collections::{BTreeSet, HashMap};

use super::cnf::{cnf_convert_wcfg, is_cnf, FIXPOINT_SWEEPS};
use super::compose::{compose, Fst};
use crate::allsum::{allsum_items, AllsumItem, SolverConfig, SweepMode};
use crate::control::{control_cfg_cfg, isolate_labels};
use crate::error::{Error, Result};
use crate::grammar::{FreshNames, LdRule, Sym, Wcfg, Wldcfg};
use crate::semiring::{Semiring, Weight, DEFAULT_TOLERANCE};

pub(crate) fn fresh_for(ctrl: &Wcfg, cle: &Wldcfg) -> FreshNames {
    let mut names = ctrl.all_names();
    names.extend(cle.all_names());
    FreshNames::new(names.iter().map(String::as_str))
}

pub(crate) fn by_label(cle: &Wldcfg) -> HashMap<String, Vec<usize>> {
    let mut m: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, r) in cle.rules.iter().enumerate() {
        m.entry(r.label.clone()).or_default().push(i);
    }
    m
}

/// Replaces every label occurrence in the controller by a symbol string.
/// Labels missing from `map` stay.
pub(crate) fn substitute(ctrl: &Wcfg, map: &HashMap<String, Vec<Sym>>) -> Wcfg {
    let mut out = ctrl.clone();
    for r in &mut out.rules {
        r.rhs = r
            .rhs
            .iter()
            .flat_map(|s| match s {
                Sym::T(l) => map.get(l).cloned().unwrap_or_else(|| vec![s.clone()]),
                Sym::Nt(_) => vec![s.clone()],
            })
            .collect();
    }
    out
}

/// Drops a controller `S -> ε` rule. An empty label word never completes a
/// controllee spine, so the rule carries no weight.
pub(crate) fn drop_empty_word(ctrl: &mut Wcfg) {
    ctrl.rules.retain(|r| !r.rhs.is_empty());
}

fn require_cnf(ctrl: &Wcfg) -> Result<()> {
    if is_cnf(ctrl) {
        Ok(())
    } else {
        Err(Error::Invalid("the controller must be in Chomsky normal form".into()))
    }
}

/// Gives every controllee production its own label. Controller rules
/// `A -> l` become one alternative per production labeled `l`.
pub fn unique_labels(ctrl: &Wcfg, cle: &Wldcfg) -> (Wcfg, Wldcfg) {
    let groups = by_label(cle);
    if groups.values().all(|v| v.len() == 1) {
        return (ctrl.clone(), cle.clone());
    }
    let mut fresh = fresh_for(ctrl, cle);
    let (iso, _) = isolate_labels(ctrl);
    let mut cle2 = cle.clone();
    let mut split: HashMap<String, Vec<String>> = HashMap::new();
    let mut labels: Vec<&String> = groups.keys().collect();
    labels.sort();
    for l in labels {
        let rs = &groups[l];
        if rs.len() > 1 {
            let names: Vec<String> = rs.iter().map(|_| fresh.fresh(l)).collect();
            for (&r, n) in rs.iter().zip(&names) {
                cle2.rules[r].label = n.clone();
            }
            split.insert(l.clone(), names);
        }
    }
    let mut out = Wcfg::new(iso.semiring, &iso.start);
    for r in &iso.rules {
        match r.rhs.as_slice() {
            [Sym::T(l)] if split.contains_key(l) => {
                for n in &split[l] {
                    out.add(&r.lhs, vec![Sym::T(n.clone())], r.weight);
                }
            }
            _ => out.rules.push(r.clone()),
        }
    }
    (out, cle2)
}

/// Makes the controllee start symbol absent from right-hand sides by
/// copying its productions onto a fresh start with fresh labels.
pub(crate) fn wrap_controllee_start(ctrl: &Wcfg, cle: &Wldcfg) -> (Wcfg, Wldcfg) {
    let on_rhs = cle
        .rules
        .iter()
        .any(|r| r.rhs.iter().any(|s| s.is_nt() && s.name() == cle.start));
    if !on_rhs {
        return (ctrl.clone(), cle.clone());
    }
    let mut fresh = fresh_for(ctrl, cle);
    let (mut ctrl2, _) = isolate_labels(ctrl);
    let mut cle2 = cle.clone();
    let root = fresh.fresh(&cle.start);
    cle2.start = root.clone();
    let mut copy: HashMap<String, String> = HashMap::new();
    for r in &cle.rules {
        if r.lhs == cle.start {
            let l = copy.entry(r.label.clone()).or_insert_with(|| fresh.fresh(&r.label)).clone();
            cle2.rules.push(LdRule {
                label: l,
                lhs: root.clone(),
                ..r.clone()
            });
        }
    }
    let extra: Vec<_> = ctrl2
        .rules
        .iter()
        .filter_map(|r| match r.rhs.as_slice() {
            [Sym::T(l)] => copy.get(l).map(|c| (r.lhs.clone(), c.clone(), r.weight)),
            _ => None,
        })
        .collect();
    for (a, c, w) in extra {
        ctrl2.add(&a, vec![Sym::T(c)], w);
    }
    (ctrl2, cle2)
}

/// Moves terminals out of controllee productions with two or more symbols:
/// `X -> A a *B` becomes `X -> A T_a *B` with `t_a : T_a -> a`, and the
/// controller gains `S -> t_a` so that a `T_a` child sees the word `t_a`.
pub(crate) fn lift_terminals(ctrl: &Wcfg, cle: &Wldcfg) -> (Wcfg, Wldcfg) {
    let needs = cle.rules.iter().any(|r| r.rhs.len() > 1 && r.rhs.iter().any(|s| !s.is_nt()));
    if !needs {
        return (ctrl.clone(), cle.clone());
    }
    let sr = ctrl.semiring;
    let mut fresh = fresh_for(ctrl, cle);
    let mut ctrl2 = ctrl.clone();
    let mut cle2 = cle.clone();
    let mut lifted: HashMap<String, String> = HashMap::new();
    let mut order = Vec::new();
    for r in &mut cle2.rules {
        if r.rhs.len() < 2 {
            continue;
        }
        for s in &mut r.rhs {
            if let Sym::T(a) = s {
                let n = lifted
                    .entry(a.clone())
                    .or_insert_with(|| {
                        order.push(a.clone());
                        fresh.fresh(&format!("T_{a}"))
                    })
                    .clone();
                *s = Sym::Nt(n);
            }
        }
    }
    for a in order {
        let l = fresh.fresh(&format!("t_{a}"));
        cle2.add(&l, &lifted[&a], vec![Sym::T(a)], None, sr.one());
        ctrl2.add(&ctrl.start, vec![Sym::T(l)], sr.one());
    }
    (ctrl2, cle2)
}

/// Gives productions with nonterminals but no distinguished child one, on
/// their last nonterminal, and appends a start-symbol word after each of
/// their labels: that child used to start over from the controller's start.
/// Valid only when those labels end every controller word they occur in and
/// labels are unique to productions.
pub(crate) fn dist_form(ctrl: &Wcfg, cle: &Wldcfg) -> (Wcfg, Wldcfg) {
    let mut map = HashMap::new();
    let mut cle2 = cle.clone();
    for r in &mut cle2.rules {
        if r.dist.is_none() {
            if let Some(i) = r.rhs.iter().rposition(Sym::is_nt) {
                r.dist = Some(i);
                map.insert(r.label.clone(), vec![Sym::T(r.label.clone()), Sym::Nt(ctrl.start.clone())]);
            }
        }
    }
    (substitute(ctrl, &map), cle2)
}

/// Replaces each production `l : X -> Y1 .. *Yd .. Yk` with `k > 2` by a
/// chain of `k - 1` binary productions through fresh nonterminals, and each
/// controller occurrence of `l` by the chain's labels.
pub fn binarize_controllee(g: &Wldcfg, controller: &Wcfg) -> Result<(Wldcfg, Wcfg)> {
    for r in &g.rules {
        if r.rhs.len() > 2 && r.dist.is_none() {
            return Err(Error::Invalid(format!(
                "production `{}` has {} symbols and no distinguished child",
                r.label,
                r.rhs.len()
            )));
        }
    }
    if g.rules.iter().all(|r| r.rhs.len() <= 2) {
        return Ok((g.clone(), controller.clone()));
    }
    let (ctrl, cle) = unique_labels(controller, g);
    let sr = cle.semiring;
    let mut fresh = fresh_for(&ctrl, &cle);
    let mut out = Wldcfg::new(sr, &cle.start);
    out.terminals = cle.terminals.clone();
    let mut map: HashMap<String, Vec<Sym>> = HashMap::new();
    for r in &cle.rules {
        let k = r.rhs.len();
        let Some(d) = r.dist.filter(|_| k > 2) else {
            out.rules.push(r.clone());
            continue;
        };
        let mut labels = Vec::new();
        let mut lhs = r.lhs.clone();
        let mut weight = r.weight;
        let (mut lo, mut hi) = (0, k - 1);
        for step in 1..k {
            let label = fresh.fresh(&format!("{}_{step}", r.label));
            let last = step == k - 1;
            let (rhs, dist, next) = if lo < d {
                let z = if last { None } else { Some(fresh.fresh(&format!("{}_{step}", r.lhs))) };
                let child = z.clone().unwrap_or_else(|| r.rhs[lo + 1].name().to_string());
                let rhs = vec![r.rhs[lo].clone(), Sym::Nt(child)];
                lo += 1;
                (rhs, 1, z)
            } else {
                let z = if last { None } else { Some(fresh.fresh(&format!("{}_{step}", r.lhs))) };
                let child = z.clone().unwrap_or_else(|| r.rhs[hi - 1].name().to_string());
                let rhs = vec![Sym::Nt(child), r.rhs[hi].clone()];
                hi -= 1;
                (rhs, 0, z)
            };
            out.add(&label, &lhs, rhs, Some(dist), weight);
            labels.push(Sym::T(label));
            weight = sr.one();
            if let Some(z) = next {
                lhs = z;
            }
        }
        map.insert(r.label.clone(), labels);
    }
    Ok((out, substitute(&ctrl, &map)))
}

/// Weight with which each controllee nonterminal, started afresh, derives
/// the empty string.
pub(crate) fn empty_weights(ctrl: &Wcfg, cle: &Wldcfg) -> Result<HashMap<String, Weight>> {
    let sr = ctrl.semiring;
    let mut eps = cle.clone();
    eps.rules.retain(|r| r.rhs.iter().all(Sym::is_nt));
    let g = control_cfg_cfg(ctrl, &eps)?;
    let cfg = SolverConfig {
        tolerance: DEFAULT_TOLERANCE,
        max_sweeps: FIXPOINT_SWEEPS,
        mode: SweepMode::GaussSeidel,
    };
    let rep = allsum_items(&g, &cfg)?;
    if rep.sweeps >= cfg.max_sweeps {
        return Err(Error::Diverged("empty-string weights did not converge".into()));
    }
    let mut out = HashMap::new();
    for x in cle.nonterminals() {
        let Some(id) = g.sym.cle.get(&x) else { continue };
        let w = rep.get(&AllsumItem::Ungapped {
            x: id,
            e: g.ctrl_init,
            a: g.ctrl_start,
            p: g.cle_init,
            q: g.cle_final,
        });
        if !sr.is_zero(w) {
            out.insert(x, w);
        }
    }
    Ok(out)
}

/// Output labels of a transformation, one per (production, variant).
struct Relabel<'a> {
    cle: &'a Wldcfg,
    shared: HashMap<String, usize>,
    fresh: FreshNames,
    made: HashMap<(usize, String), String>,
    out: Wldcfg,
}

impl<'a> Relabel<'a> {
    fn new(cle: &'a Wldcfg, fresh: FreshNames, start: &str) -> Relabel<'a> {
        let shared = by_label(cle).into_iter().map(|(l, v)| (l, v.len())).collect();
        let mut out = Wldcfg::new(cle.semiring, start);
        out.terminals = cle.terminals.clone();
        Relabel {
            cle,
            shared,
            fresh,
            made: HashMap::new(),
            out,
        }
    }

    /// Label of production `r` rewritten to `lhs -> rhs`; `key` tells the
    /// variants of one production apart, and the empty key means unchanged.
    fn label(&mut self, r: usize, key: String, lhs: &str, rhs: Vec<Sym>, dist: Option<usize>) -> String {
        if let Some(l) = self.made.get(&(r, key.clone())) {
            return l.clone();
        }
        let src = &self.cle.rules[r];
        let l = if key.is_empty() && self.shared[&src.label] == 1 {
            src.label.clone()
        } else {
            self.fresh.fresh(&src.label)
        };
        let one = self.cle.semiring.one();
        self.out.add(&l, lhs, rhs, dist, one);
        self.made.insert((r, key), l.clone());
        l
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Mode {
    Init,
    Live(String),
    Dead(String),
    End,
}

/// Removes ε-productions. Every controllee element either derives the empty
/// string or not; children that do are deleted with their weight, and a
/// distinguished child that does ends the spine early. A transducer tracks
/// that choice along each label word. If the start symbol derives the empty
/// string, a single `S -> ε` production remains, driven by the controller's
/// start symbol alone.
pub fn remove_nullary_controllee(controller: &Wcfg, controllee: &Wldcfg) -> Result<(Wcfg, Wldcfg)> {
    require_cnf(controller)?;
    let mut ctrl = controller.clone();
    drop_empty_word(&mut ctrl);
    if controllee.rules.iter().all(|r| !r.rhs.is_empty()) {
        return Ok((ctrl, controllee.clone()));
    }
    let (ctrl, cle) = wrap_controllee_start(&ctrl, controllee);
    let ctrl = if is_cnf(&ctrl) { ctrl } else { cnf_convert_wcfg(&ctrl)? };
    let sr = ctrl.semiring;
    let empty = empty_weights(&ctrl, &cle)?;
    let e = |y: &str| empty.get(y).copied();
    let groups = by_label(&cle);
    let mut rel = Relabel::new(&cle, fresh_for(&ctrl, &cle), &cle.start);

    let labels = ctrl.terminal_set();
    let fst = Fst::explore(
        Mode::Init,
        &labels,
        |m| *m == Mode::End,
        |m| match m {
            Mode::Init => "init".into(),
            Mode::Live(x) => format!("{x}+"),
            Mode::Dead(x) => format!("{x}-"),
            Mode::End => "end".into(),
        },
        |m, l| {
            let mut moves = Vec::new();
            for &ri in groups.get(l).into_iter().flatten() {
                let r = &cle.rules[ri];
                let live = match m {
                    Mode::Init => true,
                    Mode::Live(x) if *x == r.lhs => true,
                    Mode::Dead(x) if *x == r.lhs => false,
                    _ => continue,
                };
                let next = |alive: bool| match r.dist {
                    Some(d) if alive => Mode::Live(r.rhs[d].name().to_string()),
                    Some(d) => Mode::Dead(r.rhs[d].name().to_string()),
                    None => Mode::End,
                };
                let fresh_pos: Vec<usize> = (0..r.rhs.len())
                    .filter(|&i| r.rhs[i].is_nt() && Some(i) != r.dist)
                    .collect();
                if !live {
                    if r.rhs.iter().any(|s| !s.is_nt()) {
                        continue;
                    }
                    let ws: Option<Vec<Weight>> = fresh_pos.iter().map(|&i| e(r.rhs[i].name())).collect();
                    if let Some(ws) = ws {
                        moves.push((None, next(false), sr.product(ws.into_iter().chain([r.weight]))));
                    }
                    continue;
                }
                // Live: choose which fresh children and whether the spine die.
                let dist_options: &[bool] = if r.dist.is_some() { &[true, false] } else { &[true] };
                for mask in 0u32..(1 << fresh_pos.len()) {
                    let dead: BTreeSet<usize> = fresh_pos
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| mask & (1 << k) != 0)
                        .map(|(_, &i)| i)
                        .collect();
                    let ws: Option<Vec<Weight>> = dead.iter().map(|&i| e(r.rhs[i].name())).collect();
                    let Some(ws) = ws else { continue };
                    for &spine in dist_options {
                        let keep: Vec<usize> = (0..r.rhs.len())
                            .filter(|i| !dead.contains(i) && (spine || Some(*i) != r.dist))
                            .collect();
                        if keep.is_empty() {
                            continue;
                        }
                        let rhs: Vec<Sym> = keep.iter().map(|&i| r.rhs[i].clone()).collect();
                        let dist = if spine { r.dist.and_then(|d| keep.iter().position(|&i| i == d)) } else { None };
                        let key = if mask == 0 && spine { String::new() } else { format!("{mask}/{spine}") };
                        let out = rel.label(ri, key, &r.lhs, rhs, dist);
                        moves.push((Some(out), next(spine), sr.product(ws.iter().copied().chain([r.weight]))));
                    }
                }
            }
            moves
        },
    );
    let Relabel { mut fresh, out: mut cle2, .. } = rel;
    let composed = compose(&ctrl, &fst, &mut fresh);
    let mut composed = cnf_convert_wcfg(&composed)?;
    drop_empty_word(&mut composed);
    if let Some(w) = e(&cle.start) {
        let l = fresh.fresh("eps");
        cle2.add(&l, &cle.start, vec![], None, sr.one());
        composed.add(&composed.start.clone(), vec![Sym::T(l)], w);
    }
    Ok((composed, cle2))
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Chain {
    Init,
    At(String, String),
    End,
}

/// Removes unary productions `l : X -> *Y`. Along a spine, a run of unary
/// steps from a root `R` ends in a non-unary production, which is copied
/// with left-hand side `R`; the transducer deletes the unary labels and
/// renames the copy.
pub fn remove_unary_controllee(controller: &Wcfg, controllee: &Wldcfg) -> Result<(Wcfg, Wldcfg)> {
    require_cnf(controller)?;
    let mut ctrl = controller.clone();
    drop_empty_word(&mut ctrl);
    let is_unary = |r: &LdRule| r.rhs.len() == 1 && r.dist == Some(0);
    if !controllee.rules.iter().any(is_unary) {
        return Ok((ctrl, controllee.clone()));
    }
    let cle = controllee;
    let groups = by_label(cle);
    let mut rel = Relabel::new(cle, fresh_for(&ctrl, cle), &cle.start);
    let labels = ctrl.terminal_set();
    let fst = Fst::explore(
        Chain::Init,
        &labels,
        |m| *m == Chain::End,
        |m| match m {
            Chain::Init => "init".into(),
            Chain::At(x, root) => format!("{x}^{root}"),
            Chain::End => "end".into(),
        },
        |m, l| {
            let mut moves = Vec::new();
            for &ri in groups.get(l).into_iter().flatten() {
                let r = &cle.rules[ri];
                let root = match m {
                    Chain::Init => r.lhs.clone(),
                    Chain::At(x, root) if *x == r.lhs => root.clone(),
                    _ => continue,
                };
                if is_unary(r) {
                    moves.push((None, Chain::At(r.rhs[0].name().to_string(), root), r.weight));
                    continue;
                }
                let key = if root == r.lhs { String::new() } else { root.clone() };
                let out = rel.label(ri, key, &root, r.rhs.clone(), r.dist);
                let next = match r.dist {
                    Some(d) => {
                        let y = r.rhs[d].name().to_string();
                        Chain::At(y.clone(), y)
                    }
                    None => Chain::End,
                };
                moves.push((Some(out), next, r.weight));
            }
            moves
        },
    );
    let Relabel { mut fresh, out, .. } = rel;
    let composed = compose(&ctrl, &fst, &mut fresh);
    let mut composed = cnf_convert_wcfg(&composed)?;
    drop_empty_word(&mut composed);
    Ok((composed, out))
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Foot {
    Init,
    At(String),
    End,
}

/// Refines controller nonterminals by the controllee symbols at the two ends
/// of the spine segment they generate: a nonterminal `A.X.Y` derives label
/// words whose spine starts at `X` and continues at `Y` (or ends). Labels are
/// renamed per production, so the output controllee has unique labels.
pub fn root_foot_transform(controller: &Wcfg, controllee: &Wldcfg) -> Result<(Wcfg, Wldcfg)> {
    require_cnf(controller)?;
    let mut ctrl = controller.clone();
    drop_empty_word(&mut ctrl);
    let cle = controllee;
    let groups = by_label(cle);
    let mut rel = Relabel::new(cle, fresh_for(&ctrl, cle), &cle.start);
    let labels = ctrl.terminal_set();
    let fst = Fst::explore(
        Foot::Init,
        &labels,
        |m| *m == Foot::End,
        |m| match m {
            Foot::Init => "init".into(),
            Foot::At(x) => x.clone(),
            Foot::End => "end".into(),
        },
        |m, l| {
            let mut moves = Vec::new();
            for &ri in groups.get(l).into_iter().flatten() {
                let r = &cle.rules[ri];
                if matches!(m, Foot::At(x) if *x != r.lhs) || *m == Foot::End {
                    continue;
                }
                let out = rel.label(ri, String::new(), &r.lhs, r.rhs.clone(), r.dist);
                let next = match r.dist {
                    Some(d) => Foot::At(r.rhs[d].name().to_string()),
                    None => Foot::End,
                };
                moves.push((Some(out), next, r.weight));
            }
            moves
        },
    );
    let Relabel { mut fresh, out, .. } = rel;
    let composed = compose(&ctrl, &fst, &mut fresh);
    let mut composed = cnf_convert_wcfg(&composed)?;
    drop_empty_word(&mut composed);
    Ok((composed, out))
}

/// Keeps only controllee productions whose label the controller uses.
pub(crate) fn prune_controllee(ctrl: &Wcfg, cle: &Wldcfg) -> Wldcfg {
    let used: std::collections::HashSet<String> = ctrl.terminal_set().into_iter().collect();
    let mut out = cle.clone();
    out.rules.retain(|r| used.contains(&r.label));
    out
}

pub(crate) fn semiring_of(ctrl: &Wcfg, cle: &Wldcfg) -> Result<Semiring> {
    if ctrl.semiring != cle.semiring {
        return Err(Error::Invalid(format!(
            "controller uses {} but controllee uses {}",
            ctrl.semiring.name(),
            cle.semiring.name()
        )));
    }
    Ok(ctrl.semiring)
}
