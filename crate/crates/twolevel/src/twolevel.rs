//! Merged rule systems of the two-level formalisms.
//!
//! Every variant is represented the same way: each element of a sentential
//! form is a controllee symbol `X` carrying a controller state `e` and a
//! controller stack, and the controllee state is threaded left to right
//! through the sentential form. A CFG side simply has a single state.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::grammar::Variant;
use crate::semiring::{Semiring, Weight};

/// String interner for one namespace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> {
        0..self.names.len() as u32
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// The namespaces of a two-level grammar. They are disjoint by construction:
/// each has its own id space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Symbols {
    /// Controllee nonterminals (or controllee stack symbols).
    pub cle: Interner,
    /// Controller nonterminals (or controller stack symbols).
    pub ctrl: Interner,
    pub terminals: Interner,
    pub labels: Interner,
    pub ctrl_states: Interner,
    pub cle_states: Interner,
}

/// One right-hand-side element of a merged rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Elem {
    Term(u32),
    /// A non-distinguished child, which starts over with the controller's
    /// initial configuration.
    Fresh(u32),
    /// The distinguished child: it inherits the rest of the controller stack
    /// with `push` placed on top and the controller in state `f`.
    Dist { y: u32, f: u32, push: Vec<u32> },
}

/// Where a merged rule came from, as indices into the ingredient rule lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Origin {
    pub controller: Option<usize>,
    pub controllee: Option<usize>,
}

/// `(p, X[e, A ..]) -> (q, rhs)`.
///
/// A rule without a [`Elem::Dist`] element only applies when `A` is the
/// whole controller stack.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedRule {
    pub x: u32,
    pub e: u32,
    pub a: u32,
    pub p: u32,
    pub q: u32,
    pub rhs: Vec<Elem>,
    pub weight: Weight,
    pub origin: Origin,
}

impl MergedRule {
    pub fn dist(&self) -> Option<(usize, u32, u32, &[u32])> {
        self.rhs.iter().enumerate().find_map(|(i, e)| match e {
            Elem::Dist { y, f, push } => Some((i, *y, *f, push.as_slice())),
            _ => None,
        })
    }
}

/// A merged two-level rule system.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelGrammar {
    pub variant: Variant,
    pub semiring: Semiring,
    pub sym: Symbols,
    /// Controllee start symbol.
    pub start: u32,
    /// Controller start symbol.
    pub ctrl_start: u32,
    pub ctrl_init: u32,
    pub ctrl_final: u32,
    pub cle_init: u32,
    pub cle_final: u32,
    pub rules: Vec<MergedRule>,
    /// Non-fatal findings from construction, such as unmatched labels.
    pub warnings: Vec<String>,
}

impl TwoLevelGrammar {
    pub fn ctrl_state_count(&self) -> usize {
        self.sym.ctrl_states.len().max(1)
    }

    pub fn cle_state_count(&self) -> usize {
        self.sym.cle_states.len().max(1)
    }

    /// Interns a whitespace-free input: one terminal per character, unless
    /// the input contains spaces, in which case it is split on whitespace.
    pub fn tokenize(&self, input: &str) -> Result<Vec<u32>, String> {
        let toks: Vec<String> = if input.chars().any(char::is_whitespace) {
            input.split_whitespace().map(str::to_string).collect()
        } else {
            input.chars().map(|c| c.to_string()).collect()
        };
        toks.iter()
            .map(|t| {
                self.sym
                    .terminals
                    .get(t)
                    .ok_or_else(|| format!("`{t}` is not a terminal of the grammar"))
            })
            .collect()
    }

    pub fn render_string(&self, s: &[u32]) -> String {
        let multi = self.sym.terminals.names().iter().any(|n| n.chars().count() != 1);
        let parts: Vec<&str> = s.iter().map(|&t| self.sym.terminals.name(t)).collect();
        if multi {
            parts.join(" ")
        } else {
            parts.concat()
        }
    }

    fn ctrl_cfg(&self) -> bool {
        !self.variant.controller_is_pda()
    }

    fn cle_cfg(&self) -> bool {
        !self.variant.controllee_is_pda()
    }

    fn item_head(&self, out: &mut String, x: u32, e: u32, stack: &str) {
        let xs = self.sym.cle.name(x);
        if self.ctrl_cfg() {
            let _ = write!(out, "{xs}[{stack}]");
        } else {
            let _ = write!(out, "{xs}[{},{stack}]", self.sym.ctrl_states.name(e));
        }
    }

    /// Human-readable rule, e.g. `S[L1 ..] -> A[S1] S[..] D[S1]`.
    pub fn render_rule(&self, r: &MergedRule) -> String {
        let mut out = String::new();
        if !self.cle_cfg() {
            let _ = write!(out, "{}, ", self.sym.cle_states.name(r.p));
        }
        let has_dist = r.dist().is_some();
        let a = self.sym.ctrl.name(r.a);
        let stack = if has_dist { format!("{a} ..") } else { a.to_string() };
        self.item_head(&mut out, r.x, r.e, &stack);
        out.push_str(" ->");
        if !self.cle_cfg() {
            let _ = write!(out, " {},", self.sym.cle_states.name(r.q));
        }
        if r.rhs.is_empty() {
            out.push_str(" ε");
        }
        let fresh_stack = self.sym.ctrl.name(self.ctrl_start).to_string();
        for el in &r.rhs {
            out.push(' ');
            match el {
                Elem::Term(t) => {
                    let _ = write!(out, "'{}'", self.sym.terminals.name(*t));
                }
                Elem::Fresh(y) => self.item_head(&mut out, *y, self.ctrl_init, &fresh_stack),
                Elem::Dist { y, f, push } => {
                    let mut st: Vec<&str> = push.iter().map(|&b| self.sym.ctrl.name(b)).collect();
                    st.push("..");
                    self.item_head(&mut out, *y, *f, &st.join(" "));
                }
            }
        }
        out
    }
}

impl fmt::Display for TwoLevelGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} two-level grammar, start {}[{}], {} rules",
            self.variant,
            self.sym.cle.name(self.start),
            self.sym.ctrl.name(self.ctrl_start),
            self.rules.len()
        )?;
        for r in &self.rules {
            writeln!(f, "  {}  @ {}", self.render_rule(r), r.weight)?;
        }
        Ok(())
    }
}
