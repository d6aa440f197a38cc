//! Subcommands of the `fitodx` binary.
//!
//! Exit codes are stable so scripts can branch on them:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | diagnosed, or nothing to report |
//! | 1 | lint found errors, or a matrix exceeds the cap |
//! | 2 | bad input: unreadable or invalid KB, bad answers file, unknown module, bind failure |
//! | 3 | no rule matched |
//! | 4 | an answer the session needed was not supplied |

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fitodx_core::analysis::{enumerate_matrix, lint, matrix_csv, AnalysisError, DEFAULT_MATRIX_CAP};
use fitodx_core::dsl::{parse_report_bytes, ParseDiagnostic, Severity};
use fitodx_core::engine::{run_with_answers, start, EngineError, EngineState, TraceEvent};
use fitodx_core::{Answer, KnowledgeBase, Outcome};

use crate::answers::parse_answers;
use crate::service::{self, AppState, ServiceConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FINDINGS: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_MATCH: u8 = 3;
pub const EXIT_MISSING_ANSWER: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "fitodx", version, about = "Rule-based crop pest and disease diagnosis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a diagnosis session, interactively or from an answers file.
    Diagnose(DiagnoseArgs),
    /// Report shadowed, ambiguous and otherwise suspicious rules.
    Lint(LintArgs),
    /// Write a module's full decision matrix as CSV.
    Matrix(MatrixArgs),
    /// Serve diagnosis sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct KbArg {
    /// Knowledge base file (.fdx).
    #[arg(long, env = "FITODX_KB")]
    pub kb: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub kb: KbArg,
    /// JSON object of "module.question": "si"|"no". Without it, questions are
    /// asked on the terminal.
    #[arg(long)]
    pub answers: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[command(flatten)]
    pub kb: KbArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub kb: KbArg,
    #[arg(long)]
    pub module: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub kb: KbArg,
    #[arg(long, env = "FITODX_LISTEN", default_value = service::DEFAULT_LISTEN)]
    pub listen: SocketAddr,
    /// Append-only session log.
    #[arg(long, env = "FITODX_LOG", default_value = service::DEFAULT_LOG_PATH)]
    pub log: PathBuf,
    /// Directory served under /v1/images/.
    #[arg(long, env = "FITODX_IMAGE_DIR")]
    pub image_dir: Option<PathBuf>,
    /// Idle seconds before a session leaves memory.
    #[arg(long, env = "FITODX_SESSION_TTL_SECS", default_value_t = service::DEFAULT_SESSION_TTL.as_secs())]
    pub session_ttl_secs: u64,
}

impl ServeArgs {
    pub fn config(&self) -> ServiceConfig {
        ServiceConfig {
            listen: self.listen,
            log_path: self.log.clone(),
            image_dir: self.image_dir.clone(),
            session_ttl: Duration::from_secs(self.session_ttl_secs),
        }
    }
}

/// Runs one subcommand and returns its exit code. Machine-readable output
/// goes to `out`, human diagnostics to `err`.
pub fn run(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Diagnose(args) => diagnose(&args, input, out, err),
        Command::Lint(args) => lint_cmd(&args, out, err),
        Command::Matrix(args) => matrix(&args, out, err),
        Command::Serve(args) => serve(&args, out, err),
    };
    // A closed stdout or stderr is not worth a panic.
    result.unwrap_or(EXIT_INPUT)
}

type CmdResult = std::io::Result<u8>;

fn print_diagnostics(path: &Path, diagnostics: &[ParseDiagnostic], err: &mut dyn Write) -> std::io::Result<()> {
    for d in diagnostics {
        writeln!(err, "{}:{d}", path.display())?;
    }
    Ok(())
}

/// Reads and validates a KB, reporting problems on `err`. Warnings are
/// printed and do not fail the load.
fn load_kb(path: &Path, err: &mut dyn Write) -> std::io::Result<Option<KnowledgeBase>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            writeln!(err, "{}: {e}", path.display())?;
            return Ok(None);
        }
    };
    let report = parse_report_bytes(&bytes);
    print_diagnostics(path, &report.diagnostics, err)?;
    Ok(report.kb)
}

fn diagnose(args: &DiagnoseArgs, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let Some(kb) = load_kb(&args.kb.kb, err)? else {
        return Ok(EXIT_INPUT);
    };
    let outcome = match &args.answers {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    writeln!(err, "{}: {e}", path.display())?;
                    return Ok(EXIT_INPUT);
                }
            };
            let answers = match parse_answers(&kb, &text) {
                Ok(a) => a,
                Err(e) => {
                    writeln!(err, "{}: {e}", path.display())?;
                    return Ok(EXIT_INPUT);
                }
            };
            match run_with_answers(kb, &answers) {
                Ok((outcome, _)) => outcome,
                Err(EngineError::MissingAnswer(q)) => {
                    writeln!(err, "missing answer for `{q}`")?;
                    return Ok(EXIT_MISSING_ANSWER);
                }
                Err(e) => {
                    writeln!(err, "{e}")?;
                    return Ok(EXIT_INPUT);
                }
            }
        }
        None => {
            let mut state = match start(kb) {
                Ok(s) => s,
                Err(e) => {
                    writeln!(err, "{e}")?;
                    return Ok(EXIT_INPUT);
                }
            };
            if let Some(code) = ask_interactively(&mut state, input, out, err)? {
                return Ok(code);
            }
            let outcome = state.outcome().cloned().expect("loop ends when the session finishes");
            print_outcome(&outcome, out)?;
            print_explanation(&state, out)?;
            return Ok(exit_for(&outcome));
        }
    };
    print_outcome(&outcome, out)?;
    Ok(exit_for(&outcome))
}

/// Terminal answers: `si`, `sí`, `s`, `no`, `n`, any case.
pub fn terminal_answer(token: &str) -> Option<Answer> {
    match token.trim().to_lowercase().as_str() {
        "si" | "sí" | "s" => Some(Answer::Si),
        "no" | "n" => Some(Answer::No),
        _ => None,
    }
}

/// Asks until the session finishes. Returns an exit code if input ran out.
fn ask_interactively(
    state: &mut EngineState,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::io::Result<Option<u8>> {
    while let Some(question) = state.pending_question().cloned() {
        let ordinal = state.pending_ordinal().unwrap_or_default();
        loop {
            write!(out, "[{ordinal}] {} (si/no): ", question.text)?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                writeln!(out)?;
                writeln!(err, "input ended before `{}` was answered", question.id)?;
                return Ok(Some(EXIT_MISSING_ANSWER));
            }
            match terminal_answer(&line) {
                Some(answer) => {
                    state
                        .submit_answer(&question.id, answer)
                        .expect("answering the pending question");
                    break;
                }
                None => writeln!(err, "please answer si or no")?,
            }
        }
    }
    Ok(None)
}

fn exit_for(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Diagnosed { .. } => EXIT_OK,
        Outcome::NoMatch { .. } => EXIT_NO_MATCH,
    }
}

fn print_outcome(outcome: &Outcome, out: &mut dyn Write) -> std::io::Result<()> {
    match outcome {
        Outcome::Diagnosed {
            module,
            rule,
            diagnosis,
        } => {
            writeln!(out, "diagnosis: {}", diagnosis.name)?;
            writeln!(out, "rule: {module}.{rule}")?;
            if !diagnosis.info.is_empty() {
                writeln!(out, "\n{}", diagnosis.info)?;
            }
            if !diagnosis.treatment.is_empty() {
                writeln!(out, "\ntreatment: {}", diagnosis.treatment)?;
            }
            if !diagnosis.images.is_empty() {
                writeln!(out, "images: {}", diagnosis.images.join(", "))?;
            }
        }
        Outcome::NoMatch { last_module } => {
            writeln!(out, "no match: no rule of module `{last_module}` applies")?;
        }
    }
    Ok(())
}

fn print_explanation(state: &EngineState, out: &mut dyn Write) -> std::io::Result<()> {
    let Ok(explanation) = state.explain() else {
        return Ok(());
    };
    writeln!(out, "\nexplanation:")?;
    for step in &explanation.dispatch_path {
        writeln!(out, "  via {}.{}", step.module, step.rule)?;
    }
    if let Some(fired) = &explanation.fired {
        writeln!(out, "  fired {}.{} because:", fired.module, fired.rule)?;
        for s in &explanation.supporting {
            writeln!(out, "    {} = {}", s.prompt.trim(), s.answer)?;
        }
    }
    for f in &explanation.failed {
        writeln!(out, "  rejected {}.{} at {}", f.module, f.rule, f.failed_at)?;
    }
    let asked = state
        .trace()
        .iter()
        .filter(|e| matches!(e, TraceEvent::Asked { .. }))
        .count();
    writeln!(out, "  {asked} questions asked")
}

#[derive(serde::Serialize)]
struct LintReport<'a> {
    diagnostics: &'a [ParseDiagnostic],
    findings: &'a [fitodx_core::analysis::LintFinding],
}

fn lint_cmd(args: &LintArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let path = &args.kb.kb;
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            writeln!(err, "{}: {e}", path.display())?;
            return Ok(EXIT_INPUT);
        }
    };
    let report = parse_report_bytes(&bytes);
    let Some(kb) = report.kb else {
        print_diagnostics(path, &report.diagnostics, err)?;
        return Ok(EXIT_INPUT);
    };
    let findings = lint(&kb);
    match args.format {
        Format::Text => {
            print_diagnostics(path, &report.diagnostics, out)?;
            for f in &findings {
                writeln!(out, "{f}")?;
            }
        }
        Format::Json => {
            let json = serde_json::to_string_pretty(&LintReport {
                diagnostics: &report.diagnostics,
                findings: &findings,
            })
            .map_err(std::io::Error::other)?;
            writeln!(out, "{json}")?;
        }
    }
    let errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
    writeln!(err, "{} finding(s), {errors} error(s)", findings.len())?;
    Ok(if errors > 0 { EXIT_FINDINGS } else { EXIT_OK })
}

fn matrix(args: &MatrixArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let Some(kb) = load_kb(&args.kb.kb, err)? else {
        return Ok(EXIT_INPUT);
    };
    let Some(module) = kb.module(&args.module) else {
        writeln!(err, "unknown module `{}`", args.module)?;
        return Ok(EXIT_INPUT);
    };
    let rows = match enumerate_matrix(module, DEFAULT_MATRIX_CAP) {
        Ok(rows) => rows,
        Err(e @ AnalysisError::TooLarge { .. }) => {
            writeln!(err, "{e}")?;
            return Ok(EXIT_FINDINGS);
        }
        Err(e) => {
            writeln!(err, "{e}")?;
            return Ok(EXIT_INPUT);
        }
    };
    let csv = matrix_csv(module, &rows);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                writeln!(err, "{}: {e}", path.display())?;
                return Ok(EXIT_INPUT);
            }
        }
        None => out.write_all(csv.as_bytes())?,
    }
    writeln!(err, "{} rows", rows.len())?;
    Ok(EXIT_OK)
}

fn serve(args: &ServeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let Some(kb) = load_kb(&args.kb.kb, err)? else {
        return Ok(EXIT_INPUT);
    };
    let config = args.config();
    let (state, replay) = match AppState::new(Ok(kb), &config) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "{e}")?;
            return Ok(EXIT_INPUT);
        }
    };
    for s in &replay.skipped {
        tracing::warn!(line = s.line, session = ?s.session_id, "skipped log line: {}", s.reason);
    }
    tracing::info!(restored = replay.sessions.len(), log = %config.log_path.display(), "session log replayed");

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = match tokio::net::TcpListener::bind(config.listen).await {
            Ok(l) => l,
            Err(e) => {
                writeln!(err, "binding {}: {e}", config.listen)?;
                return Ok(EXIT_INPUT);
            }
        };
        writeln!(out, "listening on {}", listener.local_addr()?)?;
        out.flush()?;
        service::serve(state, listener, service::shutdown_signal()).await?;
        tracing::info!("shut down");
        Ok(EXIT_OK)
    })
}
