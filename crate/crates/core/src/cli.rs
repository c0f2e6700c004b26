//! Command-line driver.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ast::{CostModel, Signature, SyntaxMode};
use crate::diag::{Diagnostic, SourceMap};
use crate::elaborate::{dump_names, validate_signature, Env};
use crate::runtime::{Machine, Policy, RuntimeError, DEFAULT_FUEL};
use crate::syntax::{parse_source, pretty_signature};
use crate::typecheck::{check_signature, Options, Overrides, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_FUEL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rast", version, about = "Checker and interpreter for session-typed Rast programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Type-check files.
    Check {
        files: Vec<PathBuf>,
        #[command(flatten)]
        opts: CheckArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Check a file, then run each exec directive.
    Run {
        file: PathBuf,
        #[command(flatten)]
        opts: CheckArgs,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Print a file in canonical form.
    Pretty {
        file: PathBuf,
        /// Print the reconstructed, instrumented explicit program instead.
        #[arg(long)]
        reconstruct: bool,
        #[command(flatten)]
        opts: CheckArgs,
    },
    /// Dump internal type names and variances.
    Names { file: PathBuf },
}

#[derive(Args, Debug, Default, Clone)]
pub struct CheckArgs {
    #[arg(long, value_parser = parse_syntax)]
    pub syntax: Option<SyntaxMode>,
    #[arg(long, value_parser = parse_model)]
    pub work: Option<CostModel>,
    #[arg(long, value_parser = parse_model)]
    pub time: Option<CostModel>,
    #[arg(long)]
    pub bound: Option<usize>,
}

impl CheckArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides { syntax: self.syntax, work: self.work, time: self.time, bound: self.bound }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

fn parse_syntax(s: &str) -> Result<SyntaxMode, String> {
    match s {
        "implicit" => Ok(SyntaxMode::Implicit),
        "explicit" => Ok(SyntaxMode::Explicit),
        _ => Err(format!("unknown syntax mode {s}")),
    }
}

fn parse_model(s: &str) -> Result<CostModel, String> {
    CostModel::parse(s).ok_or_else(|| format!("unknown cost model {s}"))
}

/// Result of checking one source text.
pub struct Checked {
    pub map: SourceMap,
    pub sig: Option<Signature>,
    pub report: Report,
}

impl Checked {
    pub fn ok(&self) -> bool {
        self.sig.is_some() && self.report.ok()
    }

    pub fn errors(&self) -> Vec<&Diagnostic> {
        self.report.diagnostics.iter().filter(|d| d.is_error()).collect()
    }

    pub fn rendered(&self) -> Vec<String> {
        self.report.diagnostics.iter().map(|d| self.map.render(d)).collect()
    }
}

/// Parses and checks a whole file.
pub fn check_text(name: &str, text: &str, o: &Overrides) -> Checked {
    let map = SourceMap::new(name, text);
    match parse_source(text) {
        Ok(sig) => {
            let opts = Options::resolve(&sig.pragma, o);
            let report = check_signature(&sig, &opts);
            Checked { map, sig: Some(sig), report }
        }
        Err(e) => {
            let mut report = Report::default();
            report.diagnostics.push(Diagnostic::error(e.span, e.message));
            Checked { map, sig: None, report }
        }
    }
}

/// The explicit program produced by reconstruction, with a pragma that
/// disables further instrumentation.
pub fn reconstructed_text(c: &Checked) -> Option<String> {
    c.report.elaborated.as_ref().map(pretty_signature)
}

#[derive(Serialize)]
struct Record<'a> {
    file: &'a str,
    decl: &'a str,
    verdict: &'a str,
    trusted: usize,
    ms: f64,
}

fn read(path: &Path) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_IO
    })
}

fn report_diagnostics(c: &Checked) {
    for line in c.rendered() {
        eprintln!("{line}");
    }
}

pub fn cmd_check(files: &[PathBuf], o: &Overrides, format: Format) -> i32 {
    let mut code = EXIT_OK;
    for path in files {
        let name = path.display().to_string();
        let text = match read(path) {
            Ok(t) => t,
            Err(c) => {
                code = code.max(c);
                continue;
            }
        };
        let c = check_text(&name, &text, o);
        report_diagnostics(&c);
        for d in &c.report.decls {
            match format {
                Format::Text => println!("{name}: {} {} ({:.1} ms)", d.name, d.verdict, d.ms),
                Format::Machine => {
                    let r = Record { file: &name, decl: &d.name, verdict: d.verdict, trusted: d.trusted, ms: d.ms };
                    println!("{}", serde_json::to_string(&r).expect("record serializes"));
                }
            }
        }
        if !c.ok() {
            code = code.max(EXIT_DIAGNOSTICS);
        }
    }
    code
}

pub fn cmd_run(path: &Path, o: &Overrides, fuel: u64) -> i32 {
    let name = path.display().to_string();
    let text = match read(path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let c = check_text(&name, &text, o);
    report_diagnostics(&c);
    let Some(sig) = c.report.elaborated.as_ref().filter(|_| c.ok()) else {
        return EXIT_DIAGNOSTICS;
    };
    for e in &sig.execs {
        println!("exec {}", e.name);
        let mut m = match Machine::new(sig, &e.name) {
            Ok(m) => m,
            Err(err) => {
                eprintln!("{}", c.map.render(&Diagnostic::error(e.span, err.to_string())));
                return EXIT_DIAGNOSTICS;
            }
        };
        match m.run(Policy::Sequential, fuel) {
            Ok(()) => print!("{}", m.observation().render()),
            Err(RuntimeError::StepLimitExceeded(n)) => {
                eprintln!("{name}: exec {}: step limit of {n} exceeded", e.name);
                return EXIT_FUEL;
            }
            Err(err) => {
                eprintln!("{name}: exec {}: {err}", e.name);
                return EXIT_DIAGNOSTICS;
            }
        }
    }
    EXIT_OK
}

pub fn cmd_pretty(path: &Path, reconstruct: bool, o: &Overrides) -> i32 {
    let name = path.display().to_string();
    let text = match read(path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    if !reconstruct {
        return match parse_source(&text) {
            Ok(sig) => {
                print!("{}", pretty_signature(&sig));
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}", SourceMap::new(&name, &text).render(&Diagnostic::error(e.span, e.message)));
                EXIT_DIAGNOSTICS
            }
        };
    }
    let c = check_text(&name, &text, o);
    match reconstructed_text(&c) {
        Some(out) if c.ok() => {
            print!("{out}");
            EXIT_OK
        }
        _ => {
            report_diagnostics(&c);
            EXIT_DIAGNOSTICS
        }
    }
}

pub fn cmd_names(path: &Path) -> i32 {
    let name = path.display().to_string();
    let text = match read(path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let map = SourceMap::new(&name, &text);
    let sig = match parse_source(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}", map.render(&Diagnostic::error(e.span, e.message)));
            return EXIT_DIAGNOSTICS;
        }
    };
    let diags = validate_signature(&sig, &crate::arith::Solver::new());
    if diags.iter().any(|d| d.is_error()) {
        for d in &diags {
            eprintln!("{}", map.render(d));
        }
        return EXIT_DIAGNOSTICS;
    }
    print!("{}", dump_names(&Env::new(sig)));
    EXIT_OK
}

pub fn main_with(cli: Cli) -> i32 {
    match cli.command {
        Command::Check { files, opts, format } => cmd_check(&files, &opts.overrides(), format),
        Command::Run { file, opts, fuel } => cmd_run(&file, &opts.overrides(), fuel),
        Command::Pretty { file, reconstruct, opts } => cmd_pretty(&file, reconstruct, &opts.overrides()),
        Command::Names { file } => cmd_names(&file),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_checks() {
        let c = check_text("e.rast", "", &Overrides::default());
        assert!(c.ok());
        assert!(c.report.decls.is_empty());
    }

    #[test]
    fn parse_error_is_diagnostic() {
        let c = check_text("e.rast", "decl f : |- ", &Overrides::default());
        assert!(!c.ok());
        assert!(c.rendered()[0].starts_with("e.rast:1."));
    }

    #[test]
    fn cli_overrides_pragma() {
        let src = "#options --work=send\ndecl f : . |- (x : 1)\nproc x <- f = close x\n";
        assert!(!check_text("w.rast", src, &Overrides::default()).ok());
        let o = Overrides { work: Some(CostModel::None), ..Overrides::default() };
        assert!(check_text("w.rast", src, &o).ok());
    }

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["rast", "check", "a.rast", "--work=send", "--format=machine"]).unwrap();
        assert!(matches!(cli.command, Command::Check { format: Format::Machine, .. }));
        assert!(Cli::try_parse_from(["rast", "check", "--work=bogus"]).is_err());
    }
}
