//! Preparing a weighted PDA controller for the normal form.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grammar::{FreshNames, PdaTrans, Wpda};

/// A prepared automaton and the transitions the preparation cannot remove:
/// non-scanning transitions pushing zero or one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedWpda {
    pub pda: Wpda,
    pub residue: Vec<PdaTrans>,
}

impl PreparedWpda {
    /// Fails with the residue listed unless it is empty.
    pub fn strict(self) -> Result<Wpda> {
        if self.residue.is_empty() {
            return Ok(self.pda);
        }
        Err(Error::NotNormalForm(
            self.residue
                .iter()
                .map(|t| {
                    format!(
                        "{} , {} -> {} , {} ({})",
                        t.from,
                        t.pop.join(" "),
                        t.to,
                        t.push.join(" "),
                        if t.push.is_empty() { "nullary" } else { "unary" }
                    )
                })
                .collect(),
        ))
    }
}

fn is_final_empty(p: &Wpda, t: &PdaTrans) -> bool {
    t.scan.is_none() && t.push.is_empty() && t.from == p.init && t.pop == [p.start.clone()] && t.to == p.fin
}

/// Brings every transition to one of: scanning with nothing pushed, or
/// non-scanning pushing two symbols. The start symbol is never pushed
/// afterwards. Non-scanning transitions pushing zero or one symbol are left
/// in place and reported, except the one emptying the start configuration.
pub fn prepare_wpda(p: &Wpda) -> Result<PreparedWpda> {
    if let Some(t) = p.trans.iter().find(|t| t.pop.len() != 1) {
        return Err(Error::Unsupported(format!(
            "transition from {} pops {} symbols; only single-pop automata are supported",
            t.from,
            t.pop.len()
        )));
    }
    let sr = p.semiring;
    let mut names = p.all_names();
    names.extend(p.trans.iter().filter_map(|t| t.scan.clone()));
    let mut fresh = FreshNames::new(names.iter().map(String::as_str));
    let mut out = p.clone();

    // A start symbol that gets pushed is replaced at the bottom by a copy
    // that is not, starting in a fresh initial state.
    if p.trans.iter().any(|t| t.push.contains(&p.start)) {
        let start = fresh.fresh(&p.start);
        let init = fresh.fresh(&p.init);
        for t in &p.trans {
            if t.from == p.init && t.pop[0] == p.start {
                out.trans.push(PdaTrans {
                    from: init.clone(),
                    pop: vec![start.clone()],
                    ..t.clone()
                });
            }
        }
        out.start = start;
        out.init = init;
    }

    // Scanning transitions that push: push a scanner symbol instead.
    let mut scanners: HashMap<String, String> = HashMap::new();
    let mut pops: Vec<(String, String, String)> = Vec::new();
    let mut step1 = Vec::new();
    for t in out.trans.drain(..) {
        match &t.scan {
            Some(a) if !t.push.is_empty() => {
                let s = scanners.entry(a.clone()).or_insert_with(|| fresh.fresh(&format!("T_{a}"))).clone();
                let key = (t.to.clone(), s.clone(), a.clone());
                if !pops.contains(&key) {
                    pops.push(key);
                }
                let mut push = vec![s];
                push.extend(t.push.iter().cloned());
                step1.push(PdaTrans { scan: None, push, ..t });
            }
            _ => step1.push(t),
        }
    }
    for (q, s, a) in pops {
        step1.push(PdaTrans {
            from: q.clone(),
            pop: vec![s],
            scan: Some(a),
            to: q,
            push: vec![],
            weight: sr.one(),
        });
    }

    // Pushes of k > 2 symbols become k - 1 two-symbol pushes through fresh
    // states: the last pushed symbols go down first.
    let mut trans = Vec::new();
    for t in step1 {
        let k = t.push.len();
        if k <= 2 {
            trans.push(t);
            continue;
        }
        let mut from = t.from.clone();
        let mut pop = t.pop[0].clone();
        let mut weight = t.weight;
        for i in (2..k).rev() {
            let state = fresh.fresh(&format!("{}_{}", t.to, i));
            let z = fresh.fresh(&format!("{}_{}", t.pop[0], i));
            trans.push(PdaTrans {
                from: from.clone(),
                pop: vec![pop.clone()],
                scan: None,
                to: state.clone(),
                push: vec![z.clone(), t.push[i].clone()],
                weight,
            });
            from = state;
            pop = z;
            weight = sr.one();
        }
        trans.push(PdaTrans {
            from,
            pop: vec![pop],
            scan: None,
            to: t.to.clone(),
            push: t.push[..2].to_vec(),
            weight,
        });
    }
    out.trans = trans;
    let residue = out
        .trans
        .iter()
        .filter(|t| t.scan.is_none() && t.push.len() < 2 && !is_final_empty(&out, t))
        .cloned()
        .collect();
    Ok(PreparedWpda { pda: out, residue })
}
