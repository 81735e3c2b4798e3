//! `ema`: validate survey schemas, simulate conversations, list branch
//! paths and run the HTTP service.
//!
//! Exit codes: 0 success, 1 invalid schema or bad arguments, 2 I/O failure.

mod simulate;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use ema_core::flow::enumerate_paths;
use ema_core::schema::{load_schema, parse_document, validate_schema, SurveySchema};
use ema_core::Timestamp;
use ema_service::{Clock, FaultPoint, FixedClock, HttpGateway, Service, SystemClock};

#[derive(Parser)]
#[command(name = "ema", version, about = "Voice-first EMA survey tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a schema document and print its diagnostics.
    Validate { file: PathBuf },
    /// Run one conversation against a schema, reading answers from stdin or a script.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        topic: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed instant, RFC 3339; its offset is the participant's local time zone.
        #[arg(long)]
        clock: Option<String>,
        /// Answers, one per line; a leading `@` marks a widget event.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "p1")]
        participant: String,
        /// Write the transcript here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every root-to-leaf path of a topic with witness answers.
    Paths {
        file: PathBuf,
        #[arg(long)]
        topic: String,
    },
    /// Serve the HTTP API over a store directory.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        bind: String,
        /// Freeze the service clock at this RFC 3339 instant.
        #[arg(long)]
        clock: Option<String>,
    },
}

#[derive(Debug)]
enum Failure {
    Domain(String),
    Environment(String),
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Failure {
        Failure::Environment(format!("{}: {e}", path.display()))
    }
}

/// An RFC 3339 instant as Unix seconds plus its UTC offset in minutes.
pub(crate) fn parse_clock(text: &str) -> Result<(Timestamp, i32), Failure> {
    let t = chrono::DateTime::parse_from_rfc3339(text)
        .map_err(|e| Failure::Domain(format!("--clock `{text}`: {e}")))?;
    Ok((t.timestamp(), t.offset().local_minus_utc() / 60))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(path, e))
}

/// Loads a schema, printing every diagnostic to stderr.
fn load(path: &Path) -> Result<SurveySchema, Failure> {
    let bytes = read(path)?;
    match load_schema(&bytes) {
        Ok(schema) => {
            for d in validate_schema(&schema) {
                eprintln!("{d}");
            }
            Ok(schema)
        }
        Err(diagnostics) => {
            for d in &diagnostics {
                eprintln!("{d}");
            }
            Err(Failure::Domain(format!("{}: schema is invalid", path.display())))
        }
    }
}

fn validate(path: &Path) -> Result<(), Failure> {
    let bytes = read(path)?;
    let diagnostics = match parse_document(&bytes) {
        Ok(schema) => validate_schema(&schema),
        Err(d) => vec![d],
    };
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if diagnostics.iter().any(|d| d.is_error()) {
        return Err(Failure::Domain(String::new()));
    }
    println!("OK");
    Ok(())
}

fn paths(path: &Path, topic: &str) -> Result<(), Failure> {
    let schema = load(path)?;
    let paths = enumerate_paths(&schema, topic).map_err(|e| Failure::Domain(e.to_string()))?;
    let rows: Vec<(String, String)> = paths
        .iter()
        .map(|p| {
            let mut route = p.nodes[0].clone();
            for (cond, node) in p.conditions.iter().zip(&p.nodes[1..]) {
                route.push_str(&format!(" -[{cond}]-> {node}"));
            }
            let answers = p.answers.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ");
            (route, answers)
        })
        .collect();
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(4);
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{:>3}  {:<width$}  answers", "#", "path");
    for (i, (route, answers)) in rows.iter().enumerate() {
        let _ = writeln!(out, "{:>3}  {route:<width$}  {answers}", i + 1);
    }
    let _ = writeln!(out, "{} path{}", rows.len(), if rows.len() == 1 { "" } else { "s" });
    Ok(())
}

fn serve(store: &Path, bind: &str, clock: Option<&str>) -> Result<(), Failure> {
    let clock: Arc<dyn Clock> = match clock {
        Some(text) => Arc::new(FixedClock::new(parse_clock(text)?.0)),
        None => Arc::new(SystemClock),
    };
    let listener = std::net::TcpListener::bind(bind).map_err(|e| Failure::Domain(format!("cannot bind {bind}: {e}")))?;
    let service = Service::open(store, clock, Arc::new(HttpGateway))
        .map_err(|e| Failure::Environment(format!("{}: {e}", store.display())))?;
    // test hook: abort the process at a crash point
    if let Ok(point) = std::env::var("EMA_CRASH_AT") {
        match point.as_str() {
            "after-response-append" => service.inject_crash(FaultPoint::AfterResponseAppend),
            "after-attempt-append" => service.inject_crash(FaultPoint::AfterAttemptAppend),
            other => return Err(Failure::Domain(format!("unknown EMA_CRASH_AT `{other}`"))),
        }
    }
    let addr = listener.local_addr().map_err(|e| Failure::Environment(e.to_string()))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Failure::Environment(e.to_string()))?;
    println!("listening on http://{addr}");
    let _ = io::stdout().flush();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Environment(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        ema_service::http::serve(listener, Arc::new(service)).await
    })
    .map_err(|e| Failure::Environment(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Simulate {
            file,
            topic,
            seed,
            clock,
            script,
            participant,
            out,
        } => {
            let schema = load(&file)?;
            let (now, offset) = match clock {
                Some(text) => parse_clock(&text)?,
                None => {
                    let local = chrono::Local::now();
                    (local.timestamp(), local.offset().local_minus_utc() / 60)
                }
            };
            let inputs: Box<dyn io::BufRead> = match &script {
                Some(path) => Box::new(io::BufReader::new(
                    std::fs::File::open(path).map_err(|e| Failure::io(path, e))?,
                )),
                None => Box::new(io::stdin().lock()),
            };
            let options = simulate::Options {
                topic: &topic,
                participant: &participant,
                seed,
                now,
                utc_offset_minutes: offset,
            };
            let transcript = simulate::run(&schema, &options, inputs, &mut io::stdout().lock())?;
            match out {
                Some(path) => std::fs::write(&path, transcript).map_err(|e| Failure::io(&path, e)),
                None => {
                    print!("{transcript}");
                    Ok(())
                }
            }
        }
        Command::Paths { file, topic } => paths(&file, &topic),
        Command::Serve { store, bind, clock } => serve(&store, &bind, clock.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            if !msg.is_empty() {
                eprintln!("ema: {msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Environment(msg)) => {
            eprintln!("ema: {msg}");
            ExitCode::from(2)
        }
    }
}
