use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Number, Value};

use twolevel::allsum::{allsum, Outcome, SolverConfig, SweepMode};
use twolevel::control::{classify_nf, control, NfGrammar};
use twolevel::grammar::{emit_file, load_file, semiring_hint, validate_pair, GrammarFile, LoadError, Severity};
use twolevel::nf::nf_convert_two_level;
use twolevel::oracle::{enumerate, step_bound};
use twolevel::semiring::{format_real, Count, Semiring, SemiringKind, Weight, DEFAULT_TOLERANCE};
use twolevel::stringsum::{best_derivation, fill_chart, stringsum, Chart};
use twolevel::twolevel::TwoLevelGrammar;
use twolevel::Error;

#[derive(Parser)]
#[command(name = "tlw", version, about = "Weighted two-level grammars: normal forms, stringsums and allsums")]
struct Cli {
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Semiring: boolean, real, counting or viterbi. Defaults to the file's
    /// `semiring` header, then to real (viterbi for `best`).
    #[arg(long, global = true, value_parser = parse_semiring)]
    semiring: Option<SemiringKind>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a grammar file and report problems.
    Validate(FileArg),
    /// Convert a grammar file to normal form and print it.
    Normalize {
        #[command(flatten)]
        file: FileArg,
        /// Write the result here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Total weight of all derivations of one string.
    Stringsum {
        #[command(flatten)]
        file: FileArg,
        /// The string: one terminal per character, or space-separated terminals.
        #[arg(long)]
        input: String,
        /// Fail instead of converting a grammar that is not in normal form.
        #[arg(long)]
        no_normalize: bool,
        /// Write every chart item as a JSON line to this file.
        #[arg(long, value_name = "PATH")]
        chart_dump: Option<PathBuf>,
    },
    /// Total weight of all derivations of all strings.
    Allsum {
        #[command(flatten)]
        file: FileArg,
        /// Accuracy of the reported value. Iteration stops once a sweep
        /// changes no item by more than a thousandth of this (relative).
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_sweeps: usize,
        #[arg(long, value_enum, default_value_t = Mode::Jacobi)]
        mode: Mode,
        /// Also report every nonzero item.
        #[arg(long)]
        items: bool,
        /// Report a non-converged value (a lower bound) instead of failing.
        #[arg(long)]
        allow_diverged: bool,
    },
    /// List every string up to a length with its weight, by exhaustive search.
    Enumerate {
        #[command(flatten)]
        file: FileArg,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        /// Derivation step limit; defaults to a bound that is complete for
        /// normal-form grammars.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// A highest-weight derivation of a string (idempotent semirings).
    Best {
        #[command(flatten)]
        file: FileArg,
        #[arg(long)]
        input: String,
    },
}

#[derive(Args)]
struct FileArg {
    /// Grammar file.
    file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Jacobi,
    GaussSeidel,
}

fn parse_semiring(s: &str) -> Result<SemiringKind, String> {
    SemiringKind::parse(s).ok_or_else(|| format!("unknown semiring `{s}`"))
}

/// A failure and its exit code: 1 for domain errors, 2 for usage and I/O.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Failure {
        Failure { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Load(_) | Error::Input(_) => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if cli.json {
                println!("{}", json!({ "error": f.msg, "exit_code": f.code }));
            }
            eprintln!("tlw: error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Validate(f) => validate_cmd(cli, &f.file),
        Cmd::Normalize { file, output } => normalize_cmd(cli, &file.file, output.as_deref()),
        Cmd::Stringsum {
            file,
            input,
            no_normalize,
            chart_dump,
        } => stringsum_cmd(cli, &file.file, input, *no_normalize, chart_dump.as_deref()),
        Cmd::Allsum {
            file,
            tol,
            max_sweeps,
            mode,
            items,
            allow_diverged,
        } => {
            if !(*tol > 0.0) {
                return Err(Failure::usage("--tol must be positive"));
            }
            // The last change underestimates the remaining error by the
            // factor 1/(1 - rate), which is large for slow contractions.
            let cfg = SolverConfig {
                tolerance: (tol * 1e-3).max(1e-14).min(*tol),
                max_sweeps: *max_sweeps,
                mode: match mode {
                    Mode::Jacobi => SweepMode::Jacobi,
                    Mode::GaussSeidel => SweepMode::GaussSeidel,
                },
            };
            allsum_cmd(cli, &file.file, *tol, &cfg, *items, *allow_diverged)
        }
        Cmd::Enumerate {
            file,
            max_len,
            max_steps,
        } => enumerate_cmd(cli, &file.file, *max_len, *max_steps),
        Cmd::Best { file, input } => best_cmd(cli, &file.file, input),
    }
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn semiring_for(cli: &Cli, text: &str, fallback: SemiringKind) -> Semiring {
    Semiring::new(cli.semiring.or_else(|| semiring_hint(text)).unwrap_or(fallback))
}

fn load(path: &Path, sr: &Semiring, text: &str) -> Res<GrammarFile> {
    load_file(text, sr).map_err(|e| match e {
        LoadError::Syntax { .. } => Failure::usage(format!("{}:{e}", path.display())),
        LoadError::Invalid(r) => Failure::usage(format!("{}: invalid grammar:\n{r}", path.display())),
    })
}

fn merged(f: &GrammarFile) -> Res<TwoLevelGrammar> {
    Ok(control(&f.controller, &f.controllee)?)
}

/// The file's normal form: as written if it already is one, else converted.
fn normal_form(f: &GrammarFile, convert: bool) -> Res<NfGrammar> {
    match classify_nf(merged(f)?) {
        Ok(nf) => Ok(nf),
        Err(Error::NotNormalForm(_)) if convert => Ok(nf_convert_two_level(&f.controller, &f.controllee)?.nf),
        Err(e) => Err(e.into()),
    }
}

/// JSON for a weight: booleans and counts exactly, reals with 15
/// significant digits, infinity as the string "inf".
fn weight_json(w: Weight) -> Value {
    match w {
        Weight::Bool(b) => Value::Bool(b),
        Weight::Count(Count::Finite(n)) => Value::Number(n.into()),
        Weight::Count(Count::Inf) => Value::String("inf".into()),
        Weight::Real(x) | Weight::Viterbi(x) => {
            if x.is_finite() {
                Value::Number(Number::from_str(&format_real(x, 15)).expect("finite reals format as JSON numbers"))
            } else {
                Value::String(format_real(x, 15))
            }
        }
    }
}

fn emit_json(mut v: Map<String, Value>, cmd: &str) {
    v.insert("command".into(), Value::String(cmd.into()));
    println!("{}", Value::Object(v));
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn validate_cmd(cli: &Cli, path: &Path) -> Res<()> {
    let text = read(path)?;
    let sr = semiring_for(cli, &text, SemiringKind::Real);
    let f = load(path, &sr, &text)?;
    let report = validate_pair(&f.controller, &f.controllee);
    let nf = classify_nf(merged(&f)?);
    let nf_issues: Vec<String> = match &nf {
        Ok(_) => Vec::new(),
        Err(Error::NotNormalForm(v)) => v.clone(),
        Err(e) => vec![e.to_string()],
    };
    if cli.json {
        let issues: Vec<Value> = report
            .issues
            .iter()
            .map(|i| {
                json!({
                    "severity": if i.severity == Severity::Error { "error" } else { "warning" },
                    "message": i.message,
                })
            })
            .collect();
        emit_json(
            obj(json!({
                "file": path.display().to_string(),
                "variant": f.variant.name(),
                "semiring": sr.name(),
                "valid": true,
                "issues": issues,
                "normal_form": nf.is_ok(),
                "normal_form_issues": nf_issues,
            })),
            "validate",
        );
    } else {
        println!("{}: valid {} grammar", path.display(), f.variant.name());
        for i in &report.issues {
            let sev = if i.severity == Severity::Error { "error" } else { "warning" };
            println!("  {sev}: {}", i.message);
        }
        if nf_issues.is_empty() {
            println!("in normal form");
        } else {
            println!("not in normal form:");
            for i in &nf_issues {
                println!("  {i}");
            }
        }
    }
    Ok(())
}

fn normalize_cmd(cli: &Cli, path: &Path, output: Option<&Path>) -> Res<()> {
    let text = read(path)?;
    let sr = semiring_for(cli, &text, SemiringKind::Real);
    let f = load(path, &sr, &text)?;
    let conv = nf_convert_two_level(&f.controller, &f.controllee)?;
    let out = emit_file(&conv.file());
    if let Some(o) = output {
        fs::write(o, &out).map_err(|e| Failure::usage(format!("{}: {e}", o.display())))?;
    }
    if cli.json {
        let mut counts = Map::new();
        for k in ["eps", "term", "pop-left", "pop-right", "push"] {
            counts.insert(k.into(), Value::Number(conv.nf.count(k).into()));
        }
        emit_json(
            obj(json!({
                "variant": conv.nf.variant().name(),
                "semiring": sr.name(),
                "rules": counts,
                "grammar": out,
            })),
            "normalize",
        );
    } else if output.is_none() {
        print!("{out}");
    }
    Ok(())
}

fn tokens(g: &TwoLevelGrammar, input: &str) -> Option<Vec<u32>> {
    match g.tokenize(input) {
        Ok(t) => Some(t),
        Err(e) => {
            eprintln!("tlw: note: {e}; the weight is zero");
            None
        }
    }
}

fn stringsum_cmd(cli: &Cli, path: &Path, input: &str, no_normalize: bool, dump: Option<&Path>) -> Res<()> {
    let text = read(path)?;
    let sr = semiring_for(cli, &text, SemiringKind::Real);
    let f = load(path, &sr, &text)?;
    let nf = normal_form(&f, !no_normalize)?;
    let w = match tokens(&nf.grammar, input) {
        Some(t) => {
            if let Some(d) = dump {
                let chart = fill_chart(&nf, &t)?;
                dump_chart(&nf.grammar, &chart, d)?;
                chart.goal()
            } else {
                stringsum(&nf, &t)?
            }
        }
        None => sr.zero(),
    };
    if cli.json {
        emit_json(
            obj(json!({ "input": input, "semiring": sr.name(), "weight": weight_json(w) })),
            "stringsum",
        );
    } else {
        println!("{w}");
    }
    Ok(())
}

fn dump_chart(g: &TwoLevelGrammar, chart: &Chart, path: &Path) -> Res<()> {
    let io = |e: std::io::Error| Failure::usage(format!("{}: {e}", path.display()));
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    let ctrl_pda = g.variant.controller_is_pda();
    let cle_pda = g.variant.controllee_is_pda();
    let cstate = |e: u32| if ctrl_pda { Value::String(g.sym.ctrl_states.name(e).into()) } else { Value::Null };
    let dstate = |p: u32| if cle_pda { Value::String(g.sym.cle_states.name(p).into()) } else { Value::Null };
    for ((i, j), k, w) in chart.ungapped_items() {
        let line = json!({
            "item": "ungapped", "i": i, "j": j,
            "x": g.sym.cle.name(k.x), "a": g.sym.ctrl.name(k.a), "e": cstate(k.e),
            "p": dstate(k.p), "q": dstate(k.q), "weight": weight_json(w),
        });
        writeln!(out, "{line}").map_err(io)?;
    }
    for ([i, j, k, l], key, w) in chart.gapped_items() {
        let line = json!({
            "item": "gapped", "i": i, "j": j, "k": k, "l": l,
            "x": g.sym.cle.name(key.x), "a": g.sym.ctrl.name(key.a), "e": cstate(key.e),
            "y": g.sym.cle.name(key.y), "f": cstate(key.f),
            "p": dstate(key.p), "q": dstate(key.q), "r": dstate(key.r), "s": dstate(key.s),
            "weight": weight_json(w),
        });
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Digits after the point that the tolerance makes meaningful.
fn decimals_for(tol: f64) -> usize {
    (-tol.log10()).ceil().clamp(1.0, 15.0) as usize
}

fn allsum_cmd(cli: &Cli, path: &Path, tol: f64, cfg: &SolverConfig, items: bool, allow_diverged: bool) -> Res<()> {
    let text = read(path)?;
    let sr = semiring_for(cli, &text, SemiringKind::Real);
    let f = load(path, &sr, &text)?;
    let g = merged(&f)?;
    let rep = allsum(&g, cfg)?;
    if rep.outcome == Outcome::Diverged && !allow_diverged {
        return Err(Error::Diverged(format!(
            "value {} after {} sweeps is only a lower bound; pass --allow-diverged to report it",
            rep.value, rep.sweeps
        ))
        .into());
    }
    if cli.json {
        let mut v = obj(json!({
            "semiring": sr.name(),
            "value": weight_json(rep.value),
            "outcome": if rep.outcome == Outcome::Converged { "converged" } else { "diverged" },
            "sweeps": rep.sweeps,
        }));
        if items {
            let list: Vec<Value> = rep
                .items
                .iter()
                .map(|(it, w)| json!({ "item": it.render(&g), "weight": weight_json(*w) }))
                .collect();
            v.insert("items".into(), Value::Array(list));
        }
        emit_json(v, "allsum");
    } else {
        match rep.value {
            Weight::Real(x) | Weight::Viterbi(x) if x.is_finite() => {
                println!("{:.*}", decimals_for(tol), x)
            }
            w => println!("{w}"),
        }
        if rep.outcome == Outcome::Diverged {
            eprintln!("tlw: note: not converged after {} sweeps; the value is a lower bound", rep.sweeps);
        }
        if items {
            for (it, w) in &rep.items {
                println!("{}\t{w}", it.render(&g));
            }
        }
    }
    Ok(())
}

fn enumerate_cmd(cli: &Cli, path: &Path, max_len: usize, max_steps: Option<usize>) -> Res<()> {
    let text = read(path)?;
    let sr = semiring_for(cli, &text, SemiringKind::Real);
    let f = load(path, &sr, &text)?;
    let g = merged(&f)?;
    let en = enumerate(&g, max_len, max_steps.unwrap_or_else(|| step_bound(max_len)))?;
    if cli.json {
        let list: Vec<Value> = en
            .strings
            .iter()
            .map(|(s, w)| json!({ "string": g.render_string(s), "weight": weight_json(*w) }))
            .collect();
        emit_json(
            obj(json!({ "semiring": sr.name(), "max_len": max_len, "complete": en.complete, "strings": list })),
            "enumerate",
        );
    } else {
        for (s, w) in &en.strings {
            let s = if s.is_empty() { "ε".to_string() } else { g.render_string(s) };
            println!("{s}\t{w}");
        }
        if !en.complete {
            eprintln!("tlw: note: some derivations exceeded the step limit; weights are lower bounds");
        }
    }
    Ok(())
}

fn best_cmd(cli: &Cli, path: &Path, input: &str) -> Res<()> {
    let text = read(path)?;
    let sr = semiring_for(cli, &text, SemiringKind::Viterbi);
    let f = load(path, &sr, &text)?;
    let nf = normal_form(&f, true)?;
    let best = match tokens(&nf.grammar, input) {
        Some(t) => best_derivation(&nf, &t)?,
        None => None,
    };
    let rules: Vec<String> = best
        .iter()
        .flat_map(|b| b.rules.iter().map(|&r| nf.grammar.render_rule(&nf.grammar.rules[r])))
        .collect();
    if cli.json {
        emit_json(
            obj(json!({
                "input": input,
                "semiring": sr.name(),
                "weight": weight_json(best.as_ref().map_or(sr.zero(), |b| b.weight)),
                "derivation": best.as_ref().map(|_| rules.clone()),
            })),
            "best",
        );
    } else {
        match &best {
            Some(b) => {
                println!("{}", b.weight);
                for r in &rules {
                    println!("  {r}");
                }
            }
            None => println!("no derivation"),
        }
    }
    Ok(())
}
