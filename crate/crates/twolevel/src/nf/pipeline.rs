//! The full conversion of a controller/controllee pair to normal form.

use std::collections::HashMap;

use super::cnf::{cnf_convert_wcfg, trim_wcfg};
use super::pda::prepare_wpda;
use super::wld::{
    binarize_controllee, by_label, dist_form, drop_empty_word, fresh_for, lift_terminals, prune_controllee,
    remove_nullary_controllee, remove_unary_controllee, semiring_of, wrap_controllee_start,
};
use crate::control::{classify_nf, control, isolate_labels, NfGrammar};
use crate::error::{Error, Result};
use crate::grammar::{FreshNames, GrammarFile, GrammarSpec, Sym, Variant, Wcfg, Wldcfg, RESERVED_PREFIX};

/// A normal-form pair together with its merged, classified rule system.
#[derive(Debug, Clone)]
pub struct NfConversion {
    pub controller: GrammarSpec,
    pub controllee: GrammarSpec,
    pub nf: NfGrammar,
}

impl NfConversion {
    pub fn file(&self) -> GrammarFile {
        GrammarFile {
            variant: self.nf.variant(),
            semiring_hint: Some(self.nf.semiring().kind()),
            controller: self.controller.clone(),
            controllee: self.controllee.clone(),
        }
    }
}

/// Converts a pair to normal form, preserving every string's weight.
///
/// A CFG controlling a CFG goes through the whole pipeline. A PDA controller
/// is prepared and must then leave no residue; pairs with a PDA controllee
/// or a PDA controller are accepted only if that already yields the normal
/// form.
pub fn nf_convert_two_level(controller: &GrammarSpec, controllee: &GrammarSpec) -> Result<NfConversion> {
    match (controller, controllee) {
        (GrammarSpec::Wcfg(c), GrammarSpec::Wldcfg(d)) => {
            let (c, d) = cfg_cfg(c, d)?;
            finish(GrammarSpec::Wcfg(c), GrammarSpec::Wldcfg(d))
        }
        (GrammarSpec::Wpda(p), cle) => {
            let mut pda = prepare_wpda(p)?.strict()?;
            let (init, start, fin) = (pda.init.clone(), pda.start.clone(), pda.fin.clone());
            pda.trans
                .retain(|t| !(t.scan.is_none() && t.push.is_empty() && t.from == init && t.pop == [start.clone()] && t.to == fin));
            finish(GrammarSpec::Wpda(pda), cle.clone())
        }
        (GrammarSpec::Wcfg(c), cle @ GrammarSpec::Wldpda(_)) => {
            let mut c = cnf_convert_wcfg(&isolate_labels(c).0)?;
            drop_empty_word(&mut c);
            finish(GrammarSpec::Wcfg(c), cle.clone())
        }
        _ => Err(Error::Invalid(format!(
            "a {} cannot control a {}",
            controller.kind_name(),
            controllee.kind_name()
        ))),
    }
}

fn finish(controller: GrammarSpec, controllee: GrammarSpec) -> Result<NfConversion> {
    let merged = control(&controller, &controllee)?;
    let nf = classify_nf(merged)?;
    debug_assert!(matches!(nf.variant(), Variant::CC | Variant::PC | Variant::CP | Variant::PP));
    Ok(NfConversion {
        controller,
        controllee,
        nf,
    })
}

fn cnf(c: &Wcfg) -> Result<Wcfg> {
    let mut out = cnf_convert_wcfg(c)?;
    drop_empty_word(&mut out);
    Ok(out)
}

/// Splits each controller symbol into a copy that is the bottom of the
/// stack and one that is not, and each label into one label per controllee
/// production with the production's weight moved into the controller.
/// Afterwards the stack semantics of the pair coincides with its label-word
/// semantics: no-spine productions end words, ε-rules never empty the stack.
fn refine(ctrl: &Wcfg, cle: &Wldcfg) -> (Wcfg, Wldcfg) {
    let sr = ctrl.semiring;
    let mut fresh = fresh_for(ctrl, cle);
    let (iso, _) = isolate_labels(ctrl);
    let groups = by_label(cle);
    let mut cle2 = Wldcfg::new(sr, &cle.start);
    cle2.terminals = cle.terminals.clone();
    let mut label_of = Vec::new();
    for r in &cle.rules {
        let l = if groups[&r.label].len() == 1 {
            r.label.clone()
        } else {
            fresh.fresh(&r.label)
        };
        cle2.add(&l, &r.lhs, r.rhs.clone(), r.dist, sr.one());
        label_of.push(l);
    }
    let mut bottom: HashMap<String, String> = HashMap::new();
    for a in iso.nonterminals() {
        let b = fresh.fresh(&format!("{a}$"));
        bottom.insert(a, b);
    }
    let mut out = Wcfg::new(sr, &bottom[&iso.start]);
    for r in &iso.rules {
        match r.rhs.as_slice() {
            [] => out.add(&r.lhs, vec![], r.weight),
            [Sym::T(l)] => {
                for &i in groups.get(l).into_iter().flatten() {
                    let p = &cle.rules[i];
                    let lhs = if p.dist.is_some() { &r.lhs } else { &bottom[&r.lhs] };
                    out.add(lhs, vec![Sym::T(label_of[i].clone())], sr.mul(r.weight, p.weight));
                }
            }
            rhs => {
                out.add(&r.lhs, rhs.to_vec(), r.weight);
                let mut low = rhs.to_vec();
                let last = low.len() - 1;
                low[last] = Sym::Nt(bottom[low[last].name()].clone());
                out.add(&bottom[&r.lhs], low, r.weight);
            }
        }
    }
    (out, cle2)
}

fn cfg_cfg(ctrl: &Wcfg, cle: &Wldcfg) -> Result<(Wcfg, Wldcfg)> {
    semiring_of(ctrl, cle)?;
    let (c, d) = refine(ctrl, cle);
    let c = cnf(&c)?;
    let (c, d) = wrap_controllee_start(&c, &d);
    let (c, d) = lift_terminals(&c, &d);
    let (c, d) = dist_form(&c, &d);
    let (d, c) = binarize_controllee(&d, &c)?;
    let c = cnf(&c)?;
    let (c, d) = remove_nullary_controllee(&c, &d)?;
    let (c, d) = dist_form(&c, &d);
    let c = cnf(&c)?;
    let (c, d) = remove_unary_controllee(&c, &d)?;
    Ok(cleanup(c, d))
}

/// Drops controller rules that can only place an ε-production's label
/// inside a longer word, then unused productions and symbols.
fn cleanup(mut c: Wcfg, d: Wldcfg) -> (Wcfg, Wldcfg) {
    let eps: Vec<&str> = d
        .rules
        .iter()
        .filter(|r| r.rhs.is_empty())
        .map(|r| r.label.as_str())
        .collect();
    let start = c.start.clone();
    c.rules
        .retain(|r| r.lhs == start || !matches!(r.rhs.as_slice(), [Sym::T(l)] if eps.contains(&l.as_str())));
    let c = trim_wcfg(&c);
    let d = prune_controllee(&c, &d);
    (rename_controller(&c), d)
}

/// Renames generated controller nonterminals to short names in order of
/// first appearance, the start first.
fn rename_controller(c: &Wcfg) -> Wcfg {
    let mut fresh = FreshNames::new(c.terminal_set().iter().map(String::as_str));
    let names: HashMap<String, String> = c
        .nonterminals()
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let m = if n.starts_with(RESERVED_PREFIX) { fresh.fresh(&format!("N{i}")) } else { n.clone() };
            (n, m)
        })
        .collect();
    let mut out = Wcfg::new(c.semiring, &names[&c.start]);
    out.terminals = c.terminals.clone();
    for r in &c.rules {
        let rhs = r
            .rhs
            .iter()
            .map(|s| match s {
                Sym::Nt(n) => Sym::Nt(names[n].clone()),
                t => t.clone(),
            })
            .collect();
        out.add(&names[&r.lhs], rhs, r.weight);
    }
    out
}
