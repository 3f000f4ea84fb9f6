use thiserror::Error;

use super::validate::{validate, validate_pair, ValidationReport};
use super::*;
use crate::semiring::{Semiring, SemiringKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid grammar:\n{0}")]
    Invalid(ValidationReport),
}

impl LoadError {
    fn at(line: usize, col: usize, msg: impl Into<String>) -> LoadError {
        LoadError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    SQuote(String),
    DQuote(String),
    Star(String),
    Arrow,
    At,
    Colon,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '%' | '$' | '+' | '-' | '#' | '\'')
}

fn lex(text: &str, line: usize) -> Result<Vec<Token>, LoadError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token { tok: Tok::Arrow, col });
            i += 2;
        } else if c == '@' {
            out.push(Token { tok: Tok::At, col });
            i += 1;
        } else if c == ':' {
            out.push(Token { tok: Tok::Colon, col });
            i += 1;
        } else if c == ',' {
            out.push(Token { tok: Tok::Comma, col });
            i += 1;
        } else if c == '\'' || c == '"' {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != c {
                j += 1;
            }
            if j >= chars.len() {
                return Err(LoadError::at(line, col, "unterminated quoted symbol"));
            }
            let body: String = chars[i + 1..j].iter().collect();
            if body.is_empty() {
                return Err(LoadError::at(line, col, "empty quoted symbol"));
            }
            out.push(Token {
                tok: if c == '\'' {
                    Tok::SQuote(body)
                } else {
                    Tok::DQuote(body)
                },
                col,
            });
            i = j + 1;
        } else if c == '*' {
            let mut j = i + 1;
            while j < chars.len() && ident_char(chars[j]) && !is_arrow(&chars, j) {
                j += 1;
            }
            if j == i + 1 {
                return Err(LoadError::at(line, col, "`*` must be followed by a nonterminal"));
            }
            out.push(Token {
                tok: Tok::Star(chars[i + 1..j].iter().collect()),
                col,
            });
            i = j;
        } else if ident_char(c) && c != '\'' && c != '#' {
            let mut j = i;
            while j < chars.len() && ident_char(chars[j]) && !is_arrow(&chars, j) {
                j += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[i..j].iter().collect()),
                col,
            });
            i = j;
        } else {
            return Err(LoadError::at(line, col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

fn is_arrow(chars: &[char], j: usize) -> bool {
    chars[j] == '-' && chars.get(j + 1) == Some(&'>')
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BlockKind {
    Cfg,
    Ldcfg,
    Pda,
    Ldpda,
}

struct Block {
    role_controller: bool,
    line: usize,
    spec: GrammarSpec,
}

struct Parser<'a> {
    semiring: &'a Semiring,
    allow_reserved: bool,
    line: usize,
    toks: Vec<Token>,
    pos: usize,
    line_len: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> LoadError {
        let col = self
            .toks
            .get(self.pos)
            .map(|t| t.col)
            .unwrap_or(self.line_len + 1);
        LoadError::at(self.line, col, msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn check_name(&self, name: &str) -> Result<(), LoadError> {
        if !self.allow_reserved && name.starts_with(RESERVED_PREFIX) {
            let col = self.toks[self.pos.saturating_sub(1)].col;
            return Err(LoadError::at(
                self.line,
                col,
                format!("`{name}`: names starting with `%` are reserved for generated symbols"),
            ));
        }
        Ok(())
    }

    fn ident(&mut self, what: &str) -> Result<String, LoadError> {
        match self.next() {
            Some(Tok::Ident(s)) => {
                self.check_name(&s)?;
                Ok(s)
            }
            _ => Err(self.err_prev(format!("expected {what}"))),
        }
    }

    fn err_prev(&self, msg: String) -> LoadError {
        let col = if self.pos > 0 && self.pos <= self.toks.len() {
            self.toks[self.pos - 1].col
        } else {
            self.line_len + 1
        };
        LoadError::at(self.line, col, msg)
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), LoadError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), LoadError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn end(&self) -> Result<(), LoadError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    fn weight(&mut self) -> Result<Weight, LoadError> {
        let col = self.toks.get(self.pos).map(|t| t.col);
        match self.next() {
            Some(Tok::Ident(s)) => self.semiring.parse_weight(&s).map_err(|e| {
                LoadError::at(self.line, col.unwrap_or(0), e.to_string())
            }),
            _ => Err(self.err_prev("expected a weight after `@`".to_string())),
        }
    }

    fn quoted(&mut self) -> Result<String, LoadError> {
        match self.next() {
            Some(Tok::SQuote(s)) | Some(Tok::DQuote(s)) => {
                self.check_name(&s)?;
                Ok(s)
            }
            _ => Err(self.err_prev("expected a quoted symbol".to_string())),
        }
    }

    /// Optional `@ w` and `scan "x"` clauses, in either order.
    fn tail(&mut self, allow_scan: bool) -> Result<(Weight, Option<String>), LoadError> {
        let mut weight = None;
        let mut scan = None;
        while !self.at_end() {
            match self.peek() {
                Some(Tok::At) if weight.is_none() => {
                    self.pos += 1;
                    weight = Some(self.weight()?);
                }
                Some(Tok::Ident(s)) if s == "scan" && allow_scan && scan.is_none() => {
                    self.pos += 1;
                    scan = Some(self.quoted()?);
                }
                _ => return Err(self.err("unexpected token in rule")),
            }
        }
        Ok((weight.unwrap_or_else(|| self.semiring.one()), scan))
    }

    fn label(&mut self) -> Result<String, LoadError> {
        let l = match self.next() {
            Some(Tok::Ident(s)) | Some(Tok::DQuote(s)) | Some(Tok::SQuote(s)) => s,
            _ => return Err(self.err_prev("expected a label".to_string())),
        };
        self.check_name(&l)?;
        self.expect(Tok::Colon, "`:` after the label")?;
        Ok(l)
    }

    fn cfg_rule(&mut self) -> Result<CfgRule, LoadError> {
        let lhs = self.ident("a nonterminal")?;
        self.expect(Tok::Arrow, "`->`")?;
        let mut rhs = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) => {
                    let s = self.ident("a symbol")?;
                    rhs.push(Sym::Nt(s));
                }
                Some(Tok::SQuote(_)) | Some(Tok::DQuote(_)) => rhs.push(Sym::T(self.quoted()?)),
                Some(Tok::Star(_)) => {
                    return Err(self.err("`*` marks distinguished symbols in controllee rules only"))
                }
                _ => break,
            }
        }
        let (weight, _) = self.tail(false)?;
        Ok(CfgRule { lhs, rhs, weight })
    }

    fn ld_rule(&mut self) -> Result<LdRule, LoadError> {
        let label = self.label()?;
        let lhs = self.ident("a nonterminal")?;
        self.expect(Tok::Arrow, "`->`")?;
        let mut rhs = Vec::new();
        let mut dist = None;
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) => {
                    let s = self.ident("a symbol")?;
                    rhs.push(Sym::Nt(s));
                }
                Some(Tok::Star(s)) => {
                    let s = s.clone();
                    if dist.is_some() {
                        return Err(self.err("more than one distinguished symbol"));
                    }
                    self.pos += 1;
                    self.check_name(&s)?;
                    dist = Some(rhs.len());
                    rhs.push(Sym::Nt(s));
                }
                Some(Tok::SQuote(_)) | Some(Tok::DQuote(_)) => rhs.push(Sym::T(self.quoted()?)),
                _ => break,
            }
        }
        let (weight, _) = self.tail(false)?;
        Ok(LdRule {
            label,
            lhs,
            rhs,
            dist,
            weight,
        })
    }

    /// `p , A.. -> q [, B* ]` then the tail; returns pushes with the distinguished index.
    #[allow(clippy::type_complexity)]
    fn transition(
        &mut self,
        allow_dist: bool,
    ) -> Result<(String, Vec<String>, String, Vec<String>, Option<usize>, Weight, Option<String>), LoadError>
    {
        let from = self.ident("a state")?;
        self.expect(Tok::Comma, "`,` after the state")?;
        let mut pop = Vec::new();
        while let Some(Tok::Ident(_)) = self.peek() {
            pop.push(self.ident("a stack symbol")?);
        }
        if pop.is_empty() {
            return Err(self.err("expected a popped stack symbol"));
        }
        self.expect(Tok::Arrow, "`->`")?;
        let to = self.ident("a state")?;
        let mut push = Vec::new();
        let mut dist = None;
        if self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            loop {
                match self.peek() {
                    Some(Tok::Ident(s)) if s != "scan" => push.push(self.ident("a stack symbol")?),
                    Some(Tok::Star(s)) if allow_dist => {
                        let s = s.clone();
                        if dist.is_some() {
                            return Err(self.err("more than one distinguished symbol"));
                        }
                        self.pos += 1;
                        self.check_name(&s)?;
                        dist = Some(push.len());
                        push.push(s);
                    }
                    Some(Tok::Star(_)) => {
                        return Err(self.err("`*` marks distinguished symbols in controllee transitions only"))
                    }
                    _ => break,
                }
            }
        }
        let (weight, scan) = self.tail(true)?;
        Ok((from, pop, to, push, dist, weight, scan))
    }
}

fn parse_blocks(
    text: &str,
    semiring: &Semiring,
) -> Result<(Option<Variant>, Option<SemiringKind>, Vec<Block>), LoadError> {
    let mut variant = None;
    let mut hint = None;
    let mut blocks: Vec<Block> = Vec::new();
    let mut kinds: Vec<BlockKind> = Vec::new();
    let mut generated = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = Parser {
            semiring,
            allow_reserved: generated,
            line,
            toks,
            pos: 0,
            line_len: raw.chars().count(),
        };
        let first = match p.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => String::new(),
        };
        let in_block = !blocks.is_empty();
        match first.as_str() {
            "formalism" | "semiring" | "generated" if !in_block && p.toks.len() <= 2 => {
                p.pos += 1;
                match first.as_str() {
                    "generated" => {
                        p.end()?;
                        generated = true;
                    }
                    "formalism" => {
                        let v = p.ident("a formalism name")?;
                        variant = Some(Variant::parse(&v).ok_or_else(|| {
                            p.err_prev(format!("unknown formalism `{v}` (expected cc, pc, cp or pp)"))
                        })?);
                    }
                    _ => {
                        let s = p.ident("a semiring name")?;
                        hint = Some(SemiringKind::parse(&s).ok_or_else(|| {
                            p.err_prev(format!("unknown semiring `{s}`"))
                        })?);
                    }
                }
                p.end()?;
            }
            "controller" | "controllee" if !matches!(p.toks.get(1).map(|t| &t.tok), Some(Tok::Arrow) | Some(Tok::Colon) | Some(Tok::Comma)) => {
                p.pos += 1;
                let role_controller = first == "controller";
                let kind = p.ident("a block kind")?;
                let (bk, spec) = match (role_controller, kind.as_str()) {
                    (true, "cfg") => {
                        p.keyword("start")?;
                        let s = p.ident("a start symbol")?;
                        (BlockKind::Cfg, GrammarSpec::Wcfg(Wcfg::new(*semiring, &s)))
                    }
                    (false, "ldcfg") => {
                        p.keyword("start")?;
                        let s = p.ident("a start symbol")?;
                        (BlockKind::Ldcfg, GrammarSpec::Wldcfg(Wldcfg::new(*semiring, &s)))
                    }
                    (true, "pda") | (false, "ldpda") => {
                        p.keyword("init")?;
                        let q = p.ident("an initial state")?;
                        let s = p.ident("a start stack symbol")?;
                        p.keyword("final")?;
                        let f = p.ident("a final state")?;
                        if role_controller {
                            (
                                BlockKind::Pda,
                                GrammarSpec::Wpda(Wpda {
                                    semiring: *semiring,
                                    init: q,
                                    start: s,
                                    fin: f,
                                    trans: Vec::new(),
                                    terminals: None,
                                }),
                            )
                        } else {
                            (
                                BlockKind::Ldpda,
                                GrammarSpec::Wldpda(Wldpda {
                                    semiring: *semiring,
                                    init: q,
                                    start: s,
                                    fin: f,
                                    trans: Vec::new(),
                                    terminals: None,
                                }),
                            )
                        }
                    }
                    _ => {
                        return Err(p.err_prev(format!(
                            "unknown {} kind `{kind}` (expected {})",
                            first,
                            if role_controller { "cfg or pda" } else { "ldcfg or ldpda" }
                        )))
                    }
                };
                p.end()?;
                blocks.push(Block {
                    role_controller,
                    line,
                    spec,
                });
                kinds.push(bk);
            }
            "terminals" if in_block && !matches!(p.toks.get(1).map(|t| &t.tok), Some(Tok::Arrow) | Some(Tok::Colon) | Some(Tok::Comma)) => {
                p.pos += 1;
                let mut ts = Vec::new();
                while !p.at_end() {
                    ts.push(p.quoted()?);
                }
                let slot = match &mut blocks.last_mut().unwrap().spec {
                    GrammarSpec::Wcfg(g) => &mut g.terminals,
                    GrammarSpec::Wldcfg(g) => &mut g.terminals,
                    GrammarSpec::Wpda(g) => &mut g.terminals,
                    GrammarSpec::Wldpda(g) => &mut g.terminals,
                };
                slot.get_or_insert_with(Vec::new).extend(ts);
            }
            _ => {
                let Some(block) = blocks.last_mut() else {
                    return Err(p.err("rule outside of a grammar block"));
                };
                match &mut block.spec {
                    GrammarSpec::Wcfg(g) => g.rules.push(p.cfg_rule()?),
                    GrammarSpec::Wldcfg(g) => g.rules.push(p.ld_rule()?),
                    GrammarSpec::Wpda(g) => {
                        let (from, pop, to, push, _, weight, scan) = p.transition(false)?;
                        g.trans.push(PdaTrans {
                            from,
                            pop,
                            scan,
                            to,
                            push,
                            weight,
                        });
                    }
                    GrammarSpec::Wldpda(g) => {
                        let label = p.label()?;
                        let (from, pop, to, push, dist, weight, scan) = p.transition(true)?;
                        g.trans.push(LdTrans {
                            label,
                            from,
                            pop,
                            scan,
                            to,
                            push,
                            dist,
                            weight,
                        });
                    }
                }
            }
        }
    }
    if blocks.is_empty() {
        let last = text.lines().count().max(1);
        return Err(LoadError::at(last, 1, "no grammar block"));
    }
    Ok((variant, hint, blocks))
}

/// Loads a single grammar block (controller or controllee) and validates it.
pub fn load(text: &str, semiring: &Semiring) -> Result<GrammarSpec, LoadError> {
    let (_, _, mut blocks) = parse_blocks(text, semiring)?;
    if blocks.len() > 1 {
        return Err(LoadError::at(
            blocks[1].line,
            1,
            "expected a single grammar block",
        ));
    }
    let spec = blocks.pop().unwrap().spec;
    let report = validate(&spec);
    if report.has_errors() {
        return Err(LoadError::Invalid(report));
    }
    Ok(spec)
}

/// Loads a controller/controllee pair and validates both.
pub fn load_file(text: &str, semiring: &Semiring) -> Result<GrammarFile, LoadError> {
    let (variant, hint, blocks) = parse_blocks(text, semiring)?;
    let mut controller = None;
    let mut controllee = None;
    for b in blocks {
        let slot = if b.role_controller {
            &mut controller
        } else {
            &mut controllee
        };
        if slot.is_some() {
            return Err(LoadError::at(
                b.line,
                1,
                format!(
                    "more than one {} block",
                    if b.role_controller { "controller" } else { "controllee" }
                ),
            ));
        }
        *slot = Some(b.spec);
    }
    let last = text.lines().count().max(1);
    let controller = controller.ok_or_else(|| LoadError::at(last, 1, "missing controller block"))?;
    let controllee = controllee.ok_or_else(|| LoadError::at(last, 1, "missing controllee block"))?;
    let actual = Variant::of_pair(&controller, &controllee).expect("block roles are fixed");
    if let Some(v) = variant {
        if v != actual {
            return Err(LoadError::at(
                1,
                1,
                format!("header declares formalism {v} but the blocks form {actual}"),
            ));
        }
    }
    let report = validate_pair(&controller, &controllee);
    if report.has_errors() {
        return Err(LoadError::Invalid(report));
    }
    Ok(GrammarFile {
        variant: actual,
        semiring_hint: hint,
        controller,
        controllee,
    })
}

/// Reads only the `semiring` header line, so callers can pick the semiring
/// before parsing weights.
pub fn semiring_hint(text: &str) -> Option<SemiringKind> {
    for raw in text.lines() {
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let mut it = t.split_whitespace();
        match it.next() {
            Some("semiring") => return it.next().and_then(SemiringKind::parse),
            Some("formalism") | Some("generated") => continue,
            _ => return None,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_rules() {
        let t = lex("l1 : S2 -> A *S2 'd' @ 1.0 # c", 1).unwrap();
        assert_eq!(t.len(), 9);
        assert_eq!(t[5].tok, Tok::Star("S2".into()));
    }

    #[test]
    fn empty_file() {
        let e = load("# nothing\n\n", &Semiring::real()).unwrap_err();
        assert!(e.to_string().contains("no grammar block"));
    }

    #[test]
    fn syntax_error_position() {
        let e = load("controller cfg start S\nS -> -> A\n", &Semiring::real()).unwrap_err();
        match e {
            LoadError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reserved_names() {
        let txt = "controller cfg start S\nS -> %X @ 1.0\n%X -> \"l\"\n";
        assert!(load(txt, &Semiring::real()).is_err());
        let txt = format!("generated\n{txt}");
        assert!(load(&txt, &Semiring::real()).is_ok());
    }

    #[test]
    fn pda_transition() {
        let txt = "controller pda init q S final f\nq , S -> f , @ 0.5 scan \"l\"\nq , S -> q , A S\nq , A -> q , scan \"m\"\n";
        match load(txt, &Semiring::real()).unwrap() {
            GrammarSpec::Wpda(p) => {
                assert_eq!(p.trans.len(), 3);
                assert_eq!(p.trans[0].scan.as_deref(), Some("l"));
                assert_eq!(p.trans[1].push, vec!["A".to_string(), "S".to_string()]);
                assert!(p.trans[2].push.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hint() {
        assert_eq!(
            semiring_hint("# x\nsemiring counting\ncontroller cfg start S\n"),
            Some(SemiringKind::Counting)
        );
        assert_eq!(semiring_hint("controller cfg start S\n"), None);
    }
}
