use std::fmt::Write as _;

use super::*;

fn has_reserved(spec: &GrammarSpec) -> bool {
    let names: Vec<String> = match spec {
        GrammarSpec::Wcfg(g) => g.all_names(),
        GrammarSpec::Wldcfg(g) => g.all_names(),
        GrammarSpec::Wpda(g) => {
            let mut v = g.all_names();
            v.extend(g.terminals.iter().flatten().cloned());
            v
        }
        GrammarSpec::Wldpda(g) => {
            let mut v = g.states();
            v.extend(g.stack_symbols());
            v.extend(g.labels());
            v.extend(g.trans.iter().filter_map(|t| t.scan.clone()));
            v
        }
    };
    names.iter().any(|n| n.starts_with(RESERVED_PREFIX))
}

fn label(l: &str) -> String {
    let plain = !l.is_empty()
        && !l.starts_with(['\'', '#', '*'])
        && !l.contains("->")
        && l.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '%' | '$' | '+' | '-' | '#' | '\''));
    if plain {
        l.to_string()
    } else {
        format!("\"{l}\"")
    }
}

fn weight(sr: &Semiring, w: Weight) -> String {
    sr.weight_literal(w)
}

fn cfg_sym(s: &Sym, quote: char) -> String {
    match s {
        Sym::Nt(n) => n.clone(),
        Sym::T(t) => format!("{quote}{t}{quote}"),
    }
}

fn terminals_line(out: &mut String, ts: &Option<Vec<String>>, quote: char) {
    if let Some(ts) = ts {
        out.push_str("terminals");
        for t in ts {
            let _ = write!(out, " {quote}{t}{quote}");
        }
        out.push('\n');
    }
}

fn block(out: &mut String, spec: &GrammarSpec) {
    match spec {
        GrammarSpec::Wcfg(g) => {
            let _ = writeln!(out, "controller cfg start {}", g.start);
            terminals_line(out, &g.terminals, '"');
            for r in &g.rules {
                let _ = write!(out, "{} ->", r.lhs);
                for s in &r.rhs {
                    let _ = write!(out, " {}", cfg_sym(s, '"'));
                }
                let _ = writeln!(out, " @ {}", weight(&g.semiring, r.weight));
            }
        }
        GrammarSpec::Wldcfg(g) => {
            let _ = writeln!(out, "controllee ldcfg start {}", g.start);
            terminals_line(out, &g.terminals, '\'');
            for r in &g.rules {
                let _ = write!(out, "{} : {} ->", label(&r.label), r.lhs);
                for (i, s) in r.rhs.iter().enumerate() {
                    let star = if r.dist == Some(i) { "*" } else { "" };
                    let _ = write!(out, " {star}{}", cfg_sym(s, '\''));
                }
                let _ = writeln!(out, " @ {}", weight(&g.semiring, r.weight));
            }
        }
        GrammarSpec::Wpda(g) => {
            let _ = writeln!(out, "controller pda init {} {} final {}", g.init, g.start, g.fin);
            terminals_line(out, &g.terminals, '"');
            for t in &g.trans {
                let _ = write!(out, "{} , {} -> {} ,", t.from, t.pop.join(" "), t.to);
                for s in &t.push {
                    let _ = write!(out, " {s}");
                }
                let _ = write!(out, " @ {}", weight(&g.semiring, t.weight));
                if let Some(s) = &t.scan {
                    let _ = write!(out, " scan \"{s}\"");
                }
                out.push('\n');
            }
        }
        GrammarSpec::Wldpda(g) => {
            let _ = writeln!(out, "controllee ldpda init {} {} final {}", g.init, g.start, g.fin);
            terminals_line(out, &g.terminals, '\'');
            for t in &g.trans {
                let _ = write!(out, "{} : {} , {} -> {} ,", label(&t.label), t.from, t.pop.join(" "), t.to);
                for (i, s) in t.push.iter().enumerate() {
                    let star = if t.dist == Some(i) { "*" } else { "" };
                    let _ = write!(out, " {star}{s}");
                }
                let _ = write!(out, " @ {}", weight(&g.semiring, t.weight));
                if let Some(s) = &t.scan {
                    let _ = write!(out, " scan '{s}'");
                }
                out.push('\n');
            }
        }
    }
}

/// Writes a single block in the grammar file format.
pub fn emit(spec: &GrammarSpec) -> String {
    let mut out = String::new();
    if has_reserved(spec) {
        out.push_str("generated\n");
    }
    block(&mut out, spec);
    out
}

/// Writes a complete grammar file with header lines.
pub fn emit_file(file: &GrammarFile) -> String {
    let mut out = String::new();
    if has_reserved(&file.controller) || has_reserved(&file.controllee) {
        out.push_str("generated\n");
    }
    let _ = writeln!(out, "formalism {}", file.variant);
    if let Some(k) = file.semiring_hint {
        let _ = writeln!(out, "semiring {k}");
    }
    out.push('\n');
    block(&mut out, &file.controller);
    out.push('\n');
    block(&mut out, &file.controllee);
    out
}
