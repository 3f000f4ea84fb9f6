use std::collections::{HashMap, HashSet};
use std::fmt;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

/// Problems found in a grammar, sorted so the report does not depend on rule order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn error(&mut self, m: String) {
        self.issues.push(Issue {
            severity: Severity::Error,
            message: m,
        });
    }

    fn warn(&mut self, m: String) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message: m,
        });
    }

    fn finish(mut self) -> ValidationReport {
        self.issues.sort();
        self.issues.dedup();
        self
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.issues.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            let tag = match i.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{tag}: {}", i.message)?;
        }
        Ok(())
    }
}

fn check_declared(rep: &mut ValidationReport, declared: &Option<Vec<String>>, used: &[String], what: &str) {
    if let Some(decl) = declared {
        let decl: HashSet<&String> = decl.iter().collect();
        for t in used {
            if !decl.contains(t) {
                rep.error(format!("undeclared {what} `{t}`"));
            }
        }
    }
}

fn check_cfg(rep: &mut ValidationReport, g: &Wcfg) {
    let defined: HashSet<&str> = g.rules.iter().map(|r| r.lhs.as_str()).collect();
    if !defined.contains(g.start.as_str()) {
        rep.warn(format!("start symbol `{}` has no productions", g.start));
    }
    for r in &g.rules {
        for s in &r.rhs {
            if let Sym::Nt(n) = s {
                if !defined.contains(n.as_str()) {
                    rep.error(format!("undefined nonterminal `{n}` in a production of `{}`", r.lhs));
                }
            }
        }
    }
    check_declared(rep, &g.terminals, &g.terminal_set(), "terminal");
}

fn check_ldcfg(rep: &mut ValidationReport, g: &Wldcfg) {
    let defined: HashSet<&str> = g.rules.iter().map(|r| r.lhs.as_str()).collect();
    if !defined.contains(g.start.as_str()) {
        rep.warn(format!("start symbol `{}` has no productions", g.start));
    }
    let mut label_lhs: HashMap<&str, HashSet<&str>> = HashMap::new();
    for r in &g.rules {
        label_lhs.entry(&r.label).or_default().insert(&r.lhs);
        for s in &r.rhs {
            if let Sym::Nt(n) = s {
                if !defined.contains(n.as_str()) {
                    rep.error(format!(
                        "undefined nonterminal `{n}` in production `{}` of `{}`",
                        r.label, r.lhs
                    ));
                }
            }
        }
        if let Some(d) = r.dist {
            match r.rhs.get(d) {
                None => rep.error(format!(
                    "production `{}`: distinguished index {} is out of range",
                    r.label,
                    d + 1
                )),
                Some(Sym::T(t)) => rep.error(format!(
                    "production `{}`: distinguished index {} points at terminal `{t}`",
                    r.label,
                    d + 1
                )),
                Some(Sym::Nt(_)) => {}
            }
        }
    }
    for (l, lhss) in label_lhs {
        if lhss.len() > 1 {
            let mut v: Vec<&str> = lhss.into_iter().collect();
            v.sort();
            rep.warn(format!(
                "label `{l}` is shared by productions with different left-hand sides ({})",
                v.join(", ")
            ));
        }
    }
    check_declared(rep, &g.terminals, &g.terminal_set(), "terminal");
}

fn check_pops<'a>(rep: &mut ValidationReport, pops: impl Iterator<Item = (&'a str, &'a [String])>) {
    for (name, pop) in pops {
        if pop.len() != 1 {
            rep.error(format!(
                "transition {name} pops {} symbols; a top-down automaton pops exactly one",
                pop.len()
            ));
        }
    }
}

fn check_popped(rep: &mut ValidationReport, start: &str, popped: &HashSet<&str>, pushed: &[&str]) {
    if !popped.contains(start) {
        rep.warn(format!("start stack symbol `{start}` is never popped"));
    }
    let mut seen = HashSet::new();
    for s in pushed {
        if !popped.contains(s) && seen.insert(*s) {
            rep.warn(format!("stack symbol `{s}` is pushed but never popped"));
        }
    }
}

fn check_pda(rep: &mut ValidationReport, g: &Wpda) {
    let names: Vec<String> = (0..g.trans.len()).map(|i| format!("#{}", i + 1)).collect();
    check_pops(
        rep,
        g.trans.iter().zip(&names).map(|(t, n)| (n.as_str(), t.pop.as_slice())),
    );
    let popped: HashSet<&str> = g.trans.iter().flat_map(|t| t.pop.iter().map(|s| s.as_str())).collect();
    let pushed: Vec<&str> = g.trans.iter().flat_map(|t| t.push.iter().map(|s| s.as_str())).collect();
    check_popped(rep, &g.start, &popped, &pushed);
    let used: Vec<String> = dedup_keep_order(g.trans.iter().filter_map(|t| t.scan.clone()).collect());
    check_declared(rep, &g.terminals, &used, "terminal");
}

fn check_ldpda(rep: &mut ValidationReport, g: &Wldpda) {
    let names: Vec<String> = g.trans.iter().map(|t| format!("`{}`", t.label)).collect();
    check_pops(
        rep,
        g.trans.iter().zip(&names).map(|(t, n)| (n.as_str(), t.pop.as_slice())),
    );
    let mut label_lhs: HashMap<&str, HashSet<&str>> = HashMap::new();
    for t in &g.trans {
        if let Some(p) = t.pop.first() {
            label_lhs.entry(&t.label).or_default().insert(p);
        }
        if let Some(d) = t.dist {
            if d >= t.push.len() {
                rep.error(format!(
                    "transition `{}`: distinguished index {} is out of range",
                    t.label,
                    d + 1
                ));
            }
        }
    }
    for (l, lhss) in label_lhs {
        if lhss.len() > 1 {
            let mut v: Vec<&str> = lhss.into_iter().collect();
            v.sort();
            rep.warn(format!(
                "label `{l}` is shared by transitions popping different symbols ({})",
                v.join(", ")
            ));
        }
    }
    let popped: HashSet<&str> = g.trans.iter().flat_map(|t| t.pop.iter().map(|s| s.as_str())).collect();
    let pushed: Vec<&str> = g.trans.iter().flat_map(|t| t.push.iter().map(|s| s.as_str())).collect();
    check_popped(rep, &g.start, &popped, &pushed);
    let used: Vec<String> = dedup_keep_order(g.trans.iter().filter_map(|t| t.scan.clone()).collect());
    check_declared(rep, &g.terminals, &used, "terminal");
}

/// Checks a single grammar. Never fails; all findings are report entries.
pub fn validate(spec: &GrammarSpec) -> ValidationReport {
    let mut rep = ValidationReport::default();
    match spec {
        GrammarSpec::Wcfg(g) => check_cfg(&mut rep, g),
        GrammarSpec::Wldcfg(g) => check_ldcfg(&mut rep, g),
        GrammarSpec::Wpda(g) => check_pda(&mut rep, g),
        GrammarSpec::Wldpda(g) => check_ldpda(&mut rep, g),
    }
    rep.finish()
}

/// Checks both grammars and that the controller's labels are the controllee's labels.
pub fn validate_pair(controller: &GrammarSpec, controllee: &GrammarSpec) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if !controller.is_controller() {
        rep.error(format!("a {} cannot be a controller", controller.kind_name()));
    }
    if controllee.is_controller() {
        rep.error(format!("a {} cannot be a controllee", controllee.kind_name()));
    }
    if controller.semiring().kind() != controllee.semiring().kind() {
        rep.error(format!(
            "controller weights are {} but controllee weights are {}",
            controller.semiring().kind(),
            controllee.semiring().kind()
        ));
    }
    rep.issues.extend(validate(controller).issues);
    rep.issues.extend(validate(controllee).issues);
    let ctrl_labels: Vec<String> = match controller {
        GrammarSpec::Wcfg(g) => g.terminal_set(),
        GrammarSpec::Wpda(g) => dedup_keep_order(g.trans.iter().filter_map(|t| t.scan.clone()).collect()),
        _ => Vec::new(),
    };
    let cle_labels: HashSet<String> = match controllee {
        GrammarSpec::Wldcfg(g) => g.labels().into_iter().collect(),
        GrammarSpec::Wldpda(g) => g.labels().into_iter().collect(),
        _ => HashSet::new(),
    };
    for l in ctrl_labels {
        if !cle_labels.contains(&l) {
            rep.warn(format!("controller label `{l}` has no controllee production"));
        }
    }
    rep.finish()
}
