//! Ingredient grammars: weighted CFGs, labeled distinguished CFGs, weighted
//! PDAs and labeled distinguished PDAs, plus the text format they are read
//! from and written to.

mod emit;
mod parse;
mod validate;

use std::fmt;

use crate::semiring::{Semiring, Weight};

pub use emit::{emit, emit_file};
pub use parse::{load, load_file, semiring_hint, LoadError};
pub use validate::{validate, validate_pair, Issue, Severity, ValidationReport};

/// A right-hand-side symbol. In a controller the terminals are labels; in a
/// controllee they are the terminals of the generated language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Nt(String),
    T(String),
}

impl Sym {
    pub fn nt(s: &str) -> Sym {
        Sym::Nt(s.to_string())
    }

    pub fn t(s: &str) -> Sym {
        Sym::T(s.to_string())
    }

    pub fn is_nt(&self) -> bool {
        matches!(self, Sym::Nt(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Sym::Nt(s) | Sym::T(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfgRule {
    pub lhs: String,
    pub rhs: Vec<Sym>,
    pub weight: Weight,
}

/// Weighted context-free grammar. As a controller its terminals are labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Wcfg {
    pub semiring: Semiring,
    pub start: String,
    pub rules: Vec<CfgRule>,
    /// Optional terminal declaration; when present every used terminal must be listed.
    pub terminals: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdRule {
    pub label: String,
    pub lhs: String,
    pub rhs: Vec<Sym>,
    /// Zero-based position of the distinguished symbol, if any.
    pub dist: Option<usize>,
    pub weight: Weight,
}

/// Weighted labeled distinguished CFG.
#[derive(Debug, Clone, PartialEq)]
pub struct Wldcfg {
    pub semiring: Semiring,
    pub start: String,
    pub rules: Vec<LdRule>,
    pub terminals: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdaTrans {
    pub from: String,
    /// Popped symbols, top first. Top-down automata pop exactly one.
    pub pop: Vec<String>,
    pub scan: Option<String>,
    pub to: String,
    /// Pushed symbols, new top first.
    pub push: Vec<String>,
    pub weight: Weight,
}

/// Weighted pushdown automaton accepting by final state and empty stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Wpda {
    pub semiring: Semiring,
    pub init: String,
    pub start: String,
    pub fin: String,
    pub trans: Vec<PdaTrans>,
    pub terminals: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdTrans {
    pub label: String,
    pub from: String,
    pub pop: Vec<String>,
    pub scan: Option<String>,
    pub to: String,
    pub push: Vec<String>,
    pub dist: Option<usize>,
    pub weight: Weight,
}

/// Weighted labeled distinguished PDA.
#[derive(Debug, Clone, PartialEq)]
pub struct Wldpda {
    pub semiring: Semiring,
    pub init: String,
    pub start: String,
    pub fin: String,
    pub trans: Vec<LdTrans>,
    pub terminals: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GrammarSpec {
    Wcfg(Wcfg),
    Wldcfg(Wldcfg),
    Wpda(Wpda),
    Wldpda(Wldpda),
}

impl GrammarSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GrammarSpec::Wcfg(_) => "wcfg",
            GrammarSpec::Wldcfg(_) => "wldcfg",
            GrammarSpec::Wpda(_) => "wpda",
            GrammarSpec::Wldpda(_) => "wldpda",
        }
    }

    pub fn semiring(&self) -> Semiring {
        match self {
            GrammarSpec::Wcfg(g) => g.semiring,
            GrammarSpec::Wldcfg(g) => g.semiring,
            GrammarSpec::Wpda(g) => g.semiring,
            GrammarSpec::Wldpda(g) => g.semiring,
        }
    }

    pub fn is_controller(&self) -> bool {
        matches!(self, GrammarSpec::Wcfg(_) | GrammarSpec::Wpda(_))
    }

    pub fn rule_count(&self) -> usize {
        match self {
            GrammarSpec::Wcfg(g) => g.rules.len(),
            GrammarSpec::Wldcfg(g) => g.rules.len(),
            GrammarSpec::Wpda(g) => g.trans.len(),
            GrammarSpec::Wldpda(g) => g.trans.len(),
        }
    }
}

/// The four two-level formalisms, named controller-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// CFG controlling CFG.
    CC,
    /// PDA controlling CFG.
    PC,
    /// CFG controlling PDA.
    CP,
    /// PDA controlling PDA.
    PP,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::CC, Variant::PC, Variant::CP, Variant::PP];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CC => "cc",
            Variant::PC => "pc",
            Variant::CP => "cp",
            Variant::PP => "pp",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "cc" => Some(Variant::CC),
            "pc" => Some(Variant::PC),
            "cp" => Some(Variant::CP),
            "pp" => Some(Variant::PP),
            _ => None,
        }
    }

    pub fn controller_is_pda(self) -> bool {
        matches!(self, Variant::PC | Variant::PP)
    }

    pub fn controllee_is_pda(self) -> bool {
        matches!(self, Variant::CP | Variant::PP)
    }

    pub fn of_pair(controller: &GrammarSpec, controllee: &GrammarSpec) -> Option<Variant> {
        match (controller, controllee) {
            (GrammarSpec::Wcfg(_), GrammarSpec::Wldcfg(_)) => Some(Variant::CC),
            (GrammarSpec::Wpda(_), GrammarSpec::Wldcfg(_)) => Some(Variant::PC),
            (GrammarSpec::Wcfg(_), GrammarSpec::Wldpda(_)) => Some(Variant::CP),
            (GrammarSpec::Wpda(_), GrammarSpec::Wldpda(_)) => Some(Variant::PP),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A grammar file: one controller and one controllee.
#[derive(Debug, Clone, PartialEq)]
pub struct GrammarFile {
    pub variant: Variant,
    /// Semiring named by a `semiring` header line, if any.
    pub semiring_hint: Option<crate::semiring::SemiringKind>,
    pub controller: GrammarSpec,
    pub controllee: GrammarSpec,
}

/// Names starting with this character are reserved for generated symbols.
pub const RESERVED_PREFIX: char = '%';

/// Produces names that collide neither with each other nor with a given set.
#[derive(Debug, Clone, Default)]
pub struct FreshNames {
    used: std::collections::HashSet<String>,
}

impl FreshNames {
    pub fn new<'a, I: IntoIterator<Item = &'a str>>(taken: I) -> FreshNames {
        FreshNames {
            used: taken.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    /// `%base`, or `%base#k` for the first free `k`.
    pub fn fresh(&mut self, base: &str) -> String {
        let base = base.trim_start_matches(RESERVED_PREFIX);
        let mut name = format!("{RESERVED_PREFIX}{base}");
        let mut k = 1;
        while self.used.contains(&name) {
            k += 1;
            name = format!("{RESERVED_PREFIX}{base}#{k}");
        }
        self.used.insert(name.clone());
        name
    }
}

impl Wcfg {
    pub fn new(semiring: Semiring, start: &str) -> Wcfg {
        Wcfg {
            semiring,
            start: start.to_string(),
            rules: Vec::new(),
            terminals: None,
        }
    }

    pub fn add(&mut self, lhs: &str, rhs: Vec<Sym>, weight: Weight) {
        self.rules.push(CfgRule {
            lhs: lhs.to_string(),
            rhs,
            weight,
        });
    }

    pub fn nonterminals(&self) -> Vec<String> {
        let mut out = vec![self.start.clone()];
        for r in &self.rules {
            out.push(r.lhs.clone());
            for s in &r.rhs {
                if let Sym::Nt(n) = s {
                    out.push(n.clone());
                }
            }
        }
        dedup_keep_order(out)
    }

    pub fn terminal_set(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rules {
            for s in &r.rhs {
                if let Sym::T(t) = s {
                    out.push(t.clone());
                }
            }
        }
        dedup_keep_order(out)
    }

    pub fn all_names(&self) -> Vec<String> {
        let mut v = self.nonterminals();
        v.extend(self.terminal_set());
        v
    }
}

impl Wldcfg {
    pub fn new(semiring: Semiring, start: &str) -> Wldcfg {
        Wldcfg {
            semiring,
            start: start.to_string(),
            rules: Vec::new(),
            terminals: None,
        }
    }

    pub fn add(&mut self, label: &str, lhs: &str, rhs: Vec<Sym>, dist: Option<usize>, weight: Weight) {
        self.rules.push(LdRule {
            label: label.to_string(),
            lhs: lhs.to_string(),
            rhs,
            dist,
            weight,
        });
    }

    pub fn nonterminals(&self) -> Vec<String> {
        let mut out = vec![self.start.clone()];
        for r in &self.rules {
            out.push(r.lhs.clone());
            for s in &r.rhs {
                if let Sym::Nt(n) = s {
                    out.push(n.clone());
                }
            }
        }
        dedup_keep_order(out)
    }

    pub fn terminal_set(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rules {
            for s in &r.rhs {
                if let Sym::T(t) = s {
                    out.push(t.clone());
                }
            }
        }
        dedup_keep_order(out)
    }

    pub fn labels(&self) -> Vec<String> {
        dedup_keep_order(self.rules.iter().map(|r| r.label.clone()).collect())
    }

    pub fn all_names(&self) -> Vec<String> {
        let mut v = self.nonterminals();
        v.extend(self.terminal_set());
        v.extend(self.labels());
        v
    }
}

impl Wpda {
    pub fn states(&self) -> Vec<String> {
        let mut out = vec![self.init.clone(), self.fin.clone()];
        for t in &self.trans {
            out.push(t.from.clone());
            out.push(t.to.clone());
        }
        dedup_keep_order(out)
    }

    pub fn stack_symbols(&self) -> Vec<String> {
        let mut out = vec![self.start.clone()];
        for t in &self.trans {
            out.extend(t.pop.iter().cloned());
            out.extend(t.push.iter().cloned());
        }
        dedup_keep_order(out)
    }

    pub fn all_names(&self) -> Vec<String> {
        let mut v = self.states();
        v.extend(self.stack_symbols());
        v.extend(self.trans.iter().filter_map(|t| t.scan.clone()));
        v
    }
}

impl Wldpda {
    pub fn states(&self) -> Vec<String> {
        let mut out = vec![self.init.clone(), self.fin.clone()];
        for t in &self.trans {
            out.push(t.from.clone());
            out.push(t.to.clone());
        }
        dedup_keep_order(out)
    }

    pub fn stack_symbols(&self) -> Vec<String> {
        let mut out = vec![self.start.clone()];
        for t in &self.trans {
            out.extend(t.pop.iter().cloned());
            out.extend(t.push.iter().cloned());
        }
        dedup_keep_order(out)
    }

    pub fn labels(&self) -> Vec<String> {
        dedup_keep_order(self.trans.iter().map(|t| t.label.clone()).collect())
    }
}

pub(crate) fn dedup_keep_order(v: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    v.into_iter().filter(|s| seen.insert(s.clone())).collect()
}
