//! Building merged rule systems from a controller and a controllee, and
//! classifying them into normal-form rule kinds.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grammar::{FreshNames, GrammarSpec, LdRule, Sym, Variant, Wcfg, Wldcfg, Wldpda, Wpda};
use crate::semiring::{Semiring, Weight};
use crate::twolevel::{Elem, MergedRule, Origin, Symbols, TwoLevelGrammar};

/// Name of the single state used for a CFG side.
pub const SINGLE_STATE: &str = "·";

/// Replaces labels that occur inside longer right-hand sides by fresh
/// nonterminals `%L_l -> l`, so every label production has the form `A -> l`.
/// Returns the new grammar and, for each rule, the index of its source rule.
pub fn isolate_labels(g: &Wcfg) -> (Wcfg, Vec<Option<usize>>) {
    let needs = g
        .rules
        .iter()
        .any(|r| r.rhs.len() > 1 && r.rhs.iter().any(|s| !s.is_nt()));
    if !needs {
        return (g.clone(), (0..g.rules.len()).map(Some).collect());
    }
    let mut fresh = FreshNames::new(g.all_names().iter().map(String::as_str));
    let mut wrap: HashMap<String, String> = HashMap::new();
    let mut out = Wcfg::new(g.semiring, &g.start);
    out.terminals = g.terminals.clone();
    let mut origin = Vec::new();
    let mut extra = Vec::new();
    for (i, r) in g.rules.iter().enumerate() {
        if r.rhs.len() <= 1 {
            out.rules.push(r.clone());
            origin.push(Some(i));
            continue;
        }
        let rhs = r
            .rhs
            .iter()
            .map(|s| match s {
                Sym::Nt(_) => s.clone(),
                Sym::T(l) => {
                    let n = wrap.entry(l.clone()).or_insert_with(|| {
                        let n = fresh.fresh(&format!("L_{l}"));
                        extra.push((n.clone(), l.clone()));
                        n
                    });
                    Sym::Nt(n.clone())
                }
            })
            .collect();
        out.add(&r.lhs, rhs, r.weight);
        origin.push(Some(i));
    }
    for (n, l) in extra {
        out.add(&n, vec![Sym::T(l)], g.semiring.one());
        origin.push(None);
    }
    (out, origin)
}

fn check_semirings(a: Semiring, b: Semiring) -> Result<Semiring> {
    if a.kind() != b.kind() {
        return Err(Error::Invalid(format!(
            "controller weights are {} but controllee weights are {}",
            a.kind(),
            b.kind()
        )));
    }
    Ok(a)
}

fn check_ld_rules(rules: &[LdRule]) -> Result<()> {
    for r in rules {
        if let Some(d) = r.dist {
            if !matches!(r.rhs.get(d), Some(Sym::Nt(_))) {
                return Err(Error::Invalid(format!(
                    "production `{}` has a distinguished index that does not point at a nonterminal",
                    r.label
                )));
            }
        }
    }
    Ok(())
}

fn check_one_pop<'a>(pops: impl Iterator<Item = &'a Vec<String>>) -> Result<()> {
    for p in pops {
        if p.len() != 1 {
            return Err(Error::Invalid(format!(
                "transition pops {} symbols; only top-down automata can be combined",
                p.len()
            )));
        }
    }
    Ok(())
}

/// One controllee step, in a form shared by CFG productions and PDA transitions.
struct CleStep {
    idx: usize,
    label: String,
    lhs: String,
    p: String,
    q: String,
    /// `None` for terminals.
    rhs: Vec<Sym>,
    dist: Option<usize>,
    weight: Weight,
}

/// One controller step.
enum CtrlStep {
    /// `(e, A) -> (f, beta)` without a label.
    Rewrite {
        idx: Option<usize>,
        e: String,
        a: String,
        f: String,
        push: Vec<String>,
        weight: Weight,
    },
    /// `(e, A) --l--> (f, gamma)`.
    Label {
        idx: Option<usize>,
        e: String,
        a: String,
        label: String,
        f: String,
        push: Vec<String>,
        weight: Weight,
    },
}

struct Builder {
    variant: Variant,
    semiring: Semiring,
    ctrl_start: String,
    ctrl_init: String,
    ctrl_final: String,
    cle_start: String,
    cle_init: String,
    cle_final: String,
    ctrl: Vec<CtrlStep>,
    cle: Vec<CleStep>,
    cle_symbols: Vec<String>,
    ctrl_symbols: Vec<String>,
    ctrl_states: Vec<String>,
    cle_states: Vec<String>,
    terminals: Vec<String>,
}

impl Builder {
    fn build(self) -> TwoLevelGrammar {
        let mut sym = Symbols::default();
        for s in &self.cle_symbols {
            sym.cle.intern(s);
        }
        for s in &self.ctrl_symbols {
            sym.ctrl.intern(s);
        }
        for s in &self.ctrl_states {
            sym.ctrl_states.intern(s);
        }
        for s in &self.cle_states {
            sym.cle_states.intern(s);
        }
        for t in &self.terminals {
            sym.terminals.intern(t);
        }
        let start = sym.cle.intern(&self.cle_start);
        let ctrl_start = sym.ctrl.intern(&self.ctrl_start);
        let ctrl_init = sym.ctrl_states.intern(&self.ctrl_init);
        let ctrl_final = sym.ctrl_states.intern(&self.ctrl_final);
        let cle_init = sym.cle_states.intern(&self.cle_init);
        let cle_final = sym.cle_states.intern(&self.cle_final);

        let mut by_label: HashMap<&str, Vec<&CleStep>> = HashMap::new();
        for s in &self.cle {
            by_label.entry(&s.label).or_default().push(s);
            sym.labels.intern(&s.label);
        }
        let cle_syms: Vec<u32> = sym.cle.ids().collect();
        let cle_state_ids: Vec<u32> = sym.cle_states.ids().collect();
        let mut rules = Vec::new();
        let mut warnings = Vec::new();
        let sr = self.semiring;
        for c in &self.ctrl {
            match c {
                CtrlStep::Rewrite {
                    idx,
                    e,
                    a,
                    f,
                    push,
                    weight,
                } => {
                    let (e, a, f) = (
                        sym.ctrl_states.intern(e),
                        sym.ctrl.intern(a),
                        sym.ctrl_states.intern(f),
                    );
                    let push: Vec<u32> = push.iter().map(|b| sym.ctrl.intern(b)).collect();
                    for &x in &cle_syms {
                        for &p in &cle_state_ids {
                            rules.push(MergedRule {
                                x,
                                e,
                                a,
                                p,
                                q: p,
                                rhs: vec![Elem::Dist {
                                    y: x,
                                    f,
                                    push: push.clone(),
                                }],
                                weight: *weight,
                                origin: Origin {
                                    controller: *idx,
                                    controllee: None,
                                },
                            });
                        }
                    }
                }
                CtrlStep::Label {
                    idx,
                    e,
                    a,
                    label,
                    f,
                    push,
                    weight,
                } => {
                    sym.labels.intern(label);
                    let Some(steps) = by_label.get(label.as_str()) else {
                        warnings.push(format!("controller label `{label}` has no controllee production"));
                        continue;
                    };
                    let (e, a, f_id) = (
                        sym.ctrl_states.intern(e),
                        sym.ctrl.intern(a),
                        sym.ctrl_states.intern(f),
                    );
                    let push: Vec<u32> = push.iter().map(|b| sym.ctrl.intern(b)).collect();
                    for s in steps {
                        if s.dist.is_none() && (!push.is_empty() || f_id != ctrl_final) {
                            // The controller would not be finished when the spine ends.
                            continue;
                        }
                        let rhs = s
                            .rhs
                            .iter()
                            .enumerate()
                            .map(|(i, y)| match y {
                                Sym::T(t) => Elem::Term(sym.terminals.intern(t)),
                                Sym::Nt(n) if s.dist == Some(i) => Elem::Dist {
                                    y: sym.cle.intern(n),
                                    f: f_id,
                                    push: push.clone(),
                                },
                                Sym::Nt(n) => Elem::Fresh(sym.cle.intern(n)),
                            })
                            .collect();
                        rules.push(MergedRule {
                            x: sym.cle.intern(&s.lhs),
                            e,
                            a,
                            p: sym.cle_states.intern(&s.p),
                            q: sym.cle_states.intern(&s.q),
                            rhs,
                            weight: sr.mul(*weight, s.weight),
                            origin: Origin {
                                controller: *idx,
                                controllee: Some(s.idx),
                            },
                        });
                    }
                }
            }
        }
        TwoLevelGrammar {
            variant: self.variant,
            semiring: sr,
            sym,
            start,
            ctrl_start,
            ctrl_init,
            ctrl_final,
            cle_init,
            cle_final,
            rules,
            warnings,
        }
    }
}

fn cfg_controller(g: &Wcfg) -> (Vec<CtrlStep>, Vec<String>) {
    let (iso, origin) = isolate_labels(g);
    let mut steps = Vec::new();
    for (r, idx) in iso.rules.iter().zip(origin) {
        let step = match r.rhs.as_slice() {
            [Sym::T(l)] => CtrlStep::Label {
                idx,
                e: SINGLE_STATE.into(),
                a: r.lhs.clone(),
                label: l.clone(),
                f: SINGLE_STATE.into(),
                push: Vec::new(),
                weight: r.weight,
            },
            rhs => CtrlStep::Rewrite {
                idx,
                e: SINGLE_STATE.into(),
                a: r.lhs.clone(),
                f: SINGLE_STATE.into(),
                push: rhs.iter().map(|s| s.name().to_string()).collect(),
                weight: r.weight,
            },
        };
        steps.push(step);
    }
    (steps, iso.nonterminals())
}

fn pda_controller(g: &Wpda) -> Result<Vec<CtrlStep>> {
    check_one_pop(g.trans.iter().map(|t| &t.pop))?;
    Ok(g
        .trans
        .iter()
        .enumerate()
        .map(|(i, t)| match &t.scan {
            None => CtrlStep::Rewrite {
                idx: Some(i),
                e: t.from.clone(),
                a: t.pop[0].clone(),
                f: t.to.clone(),
                push: t.push.clone(),
                weight: t.weight,
            },
            Some(l) => CtrlStep::Label {
                idx: Some(i),
                e: t.from.clone(),
                a: t.pop[0].clone(),
                label: l.clone(),
                f: t.to.clone(),
                push: t.push.clone(),
                weight: t.weight,
            },
        })
        .collect())
}

fn cfg_controllee(g: &Wldcfg) -> Result<Vec<CleStep>> {
    check_ld_rules(&g.rules)?;
    Ok(g
        .rules
        .iter()
        .enumerate()
        .map(|(i, r)| CleStep {
            idx: i,
            label: r.label.clone(),
            lhs: r.lhs.clone(),
            p: SINGLE_STATE.into(),
            q: SINGLE_STATE.into(),
            rhs: r.rhs.clone(),
            dist: r.dist,
            weight: r.weight,
        })
        .collect())
}

fn pda_controllee(g: &Wldpda) -> Result<Vec<CleStep>> {
    check_one_pop(g.trans.iter().map(|t| &t.pop))?;
    let mut out = Vec::new();
    for (i, t) in g.trans.iter().enumerate() {
        if let Some(d) = t.dist {
            if d >= t.push.len() {
                return Err(Error::Invalid(format!(
                    "transition `{}` has an out-of-range distinguished index",
                    t.label
                )));
            }
        }
        let mut rhs: Vec<Sym> = t.scan.iter().map(|a| Sym::T(a.clone())).collect();
        let off = rhs.len();
        rhs.extend(t.push.iter().map(|s| Sym::Nt(s.clone())));
        out.push(CleStep {
            idx: i,
            label: t.label.clone(),
            lhs: t.pop[0].clone(),
            p: t.from.clone(),
            q: t.to.clone(),
            rhs,
            dist: t.dist.map(|d| d + off),
            weight: t.weight,
        });
    }
    Ok(out)
}

fn pda_ctrl_symbols(g: &Wpda) -> Vec<String> {
    g.stack_symbols()
}

/// CFG controlling CFG.
pub fn control_cfg_cfg(controller: &Wcfg, controllee: &Wldcfg) -> Result<TwoLevelGrammar> {
    let semiring = check_semirings(controller.semiring, controllee.semiring)?;
    let (ctrl, ctrl_symbols) = cfg_controller(controller);
    Ok(Builder {
        variant: Variant::CC,
        semiring,
        ctrl_start: controller.start.clone(),
        ctrl_init: SINGLE_STATE.into(),
        ctrl_final: SINGLE_STATE.into(),
        cle_start: controllee.start.clone(),
        cle_init: SINGLE_STATE.into(),
        cle_final: SINGLE_STATE.into(),
        ctrl,
        cle: cfg_controllee(controllee)?,
        cle_symbols: controllee.nonterminals(),
        ctrl_symbols,
        ctrl_states: vec![SINGLE_STATE.into()],
        cle_states: vec![SINGLE_STATE.into()],
        terminals: controllee.terminal_set(),
    }
    .build())
}

/// PDA controlling CFG.
pub fn control_pda_cfg(controller: &Wpda, controllee: &Wldcfg) -> Result<TwoLevelGrammar> {
    let semiring = check_semirings(controller.semiring, controllee.semiring)?;
    Ok(Builder {
        variant: Variant::PC,
        semiring,
        ctrl_start: controller.start.clone(),
        ctrl_init: controller.init.clone(),
        ctrl_final: controller.fin.clone(),
        cle_start: controllee.start.clone(),
        cle_init: SINGLE_STATE.into(),
        cle_final: SINGLE_STATE.into(),
        ctrl: pda_controller(controller)?,
        cle: cfg_controllee(controllee)?,
        cle_symbols: controllee.nonterminals(),
        ctrl_symbols: pda_ctrl_symbols(controller),
        ctrl_states: controller.states(),
        cle_states: vec![SINGLE_STATE.into()],
        terminals: controllee.terminal_set(),
    }
    .build())
}

fn ldpda_terminals(g: &Wldpda) -> Vec<String> {
    crate::grammar::dedup_keep_order(g.trans.iter().filter_map(|t| t.scan.clone()).collect())
}

/// CFG controlling PDA.
pub fn control_cfg_pda(controller: &Wcfg, controllee: &Wldpda) -> Result<TwoLevelGrammar> {
    let semiring = check_semirings(controller.semiring, controllee.semiring)?;
    let (ctrl, ctrl_symbols) = cfg_controller(controller);
    Ok(Builder {
        variant: Variant::CP,
        semiring,
        ctrl_start: controller.start.clone(),
        ctrl_init: SINGLE_STATE.into(),
        ctrl_final: SINGLE_STATE.into(),
        cle_start: controllee.start.clone(),
        cle_init: controllee.init.clone(),
        cle_final: controllee.fin.clone(),
        ctrl,
        cle: pda_controllee(controllee)?,
        cle_symbols: controllee.stack_symbols(),
        ctrl_symbols,
        ctrl_states: vec![SINGLE_STATE.into()],
        cle_states: controllee.states(),
        terminals: ldpda_terminals(controllee),
    }
    .build())
}

/// PDA controlling PDA.
pub fn control_pda_pda(controller: &Wpda, controllee: &Wldpda) -> Result<TwoLevelGrammar> {
    let semiring = check_semirings(controller.semiring, controllee.semiring)?;
    Ok(Builder {
        variant: Variant::PP,
        semiring,
        ctrl_start: controller.start.clone(),
        ctrl_init: controller.init.clone(),
        ctrl_final: controller.fin.clone(),
        cle_start: controllee.start.clone(),
        cle_init: controllee.init.clone(),
        cle_final: controllee.fin.clone(),
        ctrl: pda_controller(controller)?,
        cle: pda_controllee(controllee)?,
        cle_symbols: controllee.stack_symbols(),
        ctrl_symbols: pda_ctrl_symbols(controller),
        ctrl_states: controller.states(),
        cle_states: controllee.states(),
        terminals: ldpda_terminals(controllee),
    }
    .build())
}

/// Dispatches on the kinds of the two grammars.
pub fn control(controller: &GrammarSpec, controllee: &GrammarSpec) -> Result<TwoLevelGrammar> {
    match (controller, controllee) {
        (GrammarSpec::Wcfg(c), GrammarSpec::Wldcfg(d)) => control_cfg_cfg(c, d),
        (GrammarSpec::Wpda(c), GrammarSpec::Wldcfg(d)) => control_pda_cfg(c, d),
        (GrammarSpec::Wcfg(c), GrammarSpec::Wldpda(d)) => control_cfg_pda(c, d),
        (GrammarSpec::Wpda(c), GrammarSpec::Wldpda(d)) => control_pda_pda(c, d),
        _ => Err(Error::Invalid(format!(
            "a {} cannot control a {}",
            controller.kind_name(),
            controllee.kind_name()
        ))),
    }
}

/// Normal-form rule kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NfKind {
    /// `(q_init, S[q_init, S̄]) -> (q_final, ε)`.
    Eps,
    /// `(p, X[e, A]) -> (q, a)`.
    Term(u32),
    /// `(p, X[e, A ..]) -> (q, Y[f, ..] Z[init, S̄])`.
    PopLeft { y: u32, z: u32 },
    /// `(p, X[e, A ..]) -> (q, Y[init, S̄] Z[f, ..])`.
    PopRight { y: u32, z: u32 },
    /// `(p, X[e, A ..]) -> (p, X[f, B C ..])`.
    Push { b: u32, c: u32 },
}

impl NfKind {
    pub fn name(&self) -> &'static str {
        match self {
            NfKind::Eps => "eps",
            NfKind::Term(_) => "term",
            NfKind::PopLeft { .. } => "pop-left",
            NfKind::PopRight { .. } => "pop-right",
            NfKind::Push { .. } => "push",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfRule {
    pub kind: NfKind,
    pub x: u32,
    pub a: u32,
    pub e: u32,
    /// Controller state after the rule; the final state for eps and term rules.
    pub f: u32,
    pub p: u32,
    pub q: u32,
    pub weight: Weight,
}

/// A classified normal-form two-level grammar. `rules[i]` is the
/// classification of `grammar.rules[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NfGrammar {
    pub grammar: TwoLevelGrammar,
    pub rules: Vec<NfRule>,
}

impl NfGrammar {
    pub fn variant(&self) -> Variant {
        self.grammar.variant
    }

    pub fn semiring(&self) -> Semiring {
        self.grammar.semiring
    }

    pub fn count(&self, kind: &str) -> usize {
        self.rules.iter().filter(|r| r.kind.name() == kind).count()
    }
}

fn classify_rule(g: &TwoLevelGrammar, r: &MergedRule) -> std::result::Result<NfRule, String> {
    let base = |kind, f| NfRule {
        kind,
        x: r.x,
        a: r.a,
        e: r.e,
        f,
        p: r.p,
        q: r.q,
        weight: r.weight,
    };
    let rendered = || g.render_rule(r);
    match r.rhs.as_slice() {
        [] => {
            if r.x == g.start && r.a == g.ctrl_start && r.e == g.ctrl_init && r.p == g.cle_init && r.q == g.cle_final {
                Ok(base(NfKind::Eps, g.ctrl_final))
            } else {
                Err(format!("{}: ε-rule whose left side is not the start", rendered()))
            }
        }
        [Elem::Term(t)] => Ok(base(NfKind::Term(*t), g.ctrl_final)),
        [Elem::Dist { y, f, push }, Elem::Fresh(z)] if push.is_empty() => {
            if *y == g.start || *z == g.start {
                Err(format!("{}: controllee start symbol on the right-hand side", rendered()))
            } else {
                Ok(base(NfKind::PopLeft { y: *y, z: *z }, *f))
            }
        }
        [Elem::Fresh(y), Elem::Dist { y: z, f, push }] if push.is_empty() => {
            if *y == g.start || *z == g.start {
                Err(format!("{}: controllee start symbol on the right-hand side", rendered()))
            } else {
                Ok(base(NfKind::PopRight { y: *y, z: *z }, *f))
            }
        }
        [Elem::Dist { y, f, push }] if *y == r.x && r.p == r.q && push.len() == 2 => {
            if push.contains(&g.ctrl_start) {
                Err(format!("{}: controller start symbol pushed", rendered()))
            } else {
                Ok(base(NfKind::Push { b: push[0], c: push[1] }, *f))
            }
        }
        [Elem::Dist { y, push, .. }] if push.is_empty() && *y != r.x => {
            Err(format!("{}: controllee-unary rule", rendered()))
        }
        [Elem::Dist { push, .. }] if push.len() == 1 => {
            Err(format!("{}: controller-unary rule", rendered()))
        }
        [Elem::Dist { push, .. }] if push.is_empty() => {
            Err(format!("{}: controller ε-rule", rendered()))
        }
        _ => Err(format!("{}: shape outside the normal form", rendered())),
    }
}

/// Whether every rule has a normal-form shape.
pub fn is_nf(g: &TwoLevelGrammar) -> bool {
    g.rules.iter().all(|r| classify_rule(g, r).is_ok())
}

/// Assigns a normal-form kind to every rule, or lists the rules that fit none.
pub fn classify_nf(g: TwoLevelGrammar) -> Result<NfGrammar> {
    let mut rules = Vec::with_capacity(g.rules.len());
    let mut bad = Vec::new();
    for r in &g.rules {
        match classify_rule(&g, r) {
            Ok(nf) => rules.push(nf),
            Err(m) => bad.push(m),
        }
    }
    if !bad.is_empty() {
        return Err(Error::NotNormalForm(bad));
    }
    Ok(NfGrammar { grammar: g, rules })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load;

    fn cfg(txt: &str) -> Wcfg {
        match load(txt, &Semiring::counting()).unwrap() {
            GrammarSpec::Wcfg(g) => g,
            _ => unreachable!(),
        }
    }

    fn ldcfg(txt: &str) -> Wldcfg {
        match load(txt, &Semiring::counting()).unwrap() {
            GrammarSpec::Wldcfg(g) => g,
            _ => unreachable!(),
        }
    }

    #[test]
    fn rewrite_rules_per_controllee_symbol() {
        let c = cfg("controller cfg start S\nS -> A B\nA -> \"l\"\nB -> \"l\"\n");
        let d = ldcfg("controllee ldcfg start X\nl : X -> 'a' *Y\nl : Y -> 'b'\n");
        let g = control_cfg_cfg(&c, &d).unwrap();
        let rewrites = g.rules.iter().filter(|r| r.origin.controllee.is_none()).count();
        assert_eq!(rewrites, 2);
    }

    #[test]
    fn unmatched_label_is_a_warning() {
        let c = cfg("controller cfg start S\nS -> \"zz\"\n");
        let d = ldcfg("controllee ldcfg start X\nl : X -> 'a'\n");
        let g = control_cfg_cfg(&c, &d).unwrap();
        assert!(g.rules.is_empty());
        assert_eq!(g.warnings.len(), 1);
    }

    #[test]
    fn classify_rejects_unary() {
        let c = cfg("controller cfg start S\nS -> \"l\"\n");
        let d = ldcfg("controllee ldcfg start X\nl : X -> *Y\nm : Y -> 'a'\n");
        let g = control_cfg_cfg(&c, &d).unwrap();
        match classify_nf(g) {
            Err(Error::NotNormalForm(v)) => assert!(v[0].contains("controllee-unary")),
            other => panic!("{other:?}"),
        }
    }
}
