//! `memorypod` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 I/O failure.
//! Results go to stdout, diagnostics to stderr.

mod commands;

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "memorypod", version, about = "Record, inspect and replay MemoryPods")]
pub struct Cli {
    /// Suppress warnings and progress output on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic capture log.
    Simulate {
        /// Scenario JSON; the built-in hard drive replacement when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fold a capture log into an MPOD file.
    Ingest {
        capture: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the id in the capture header, else a UUID derived from the log bytes.
        #[arg(long)]
        pod_id: Option<String>,
    },
    /// Check an MPOD file and report every violation.
    Validate { pod: PathBuf },
    /// Pod metadata.
    Info { pod: PathBuf },
    /// Annotation keyframes in time order.
    Keyframes { pod: PathBuf },
    /// One replay frame.
    Frame {
        pod: PathBuf,
        /// Seconds, or `mm:ss`.
        #[arg(long = "t", value_parser = parse_time)]
        t: memorypod::Timestamp,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Narrative summary.
    Summarize {
        pod: PathBuf,
        /// Deterministic template engine (the default).
        #[arg(long, conflicts_with = "remote")]
        template: bool,
        /// Chat-completion endpoint URL.
        #[arg(long, value_name = "URL")]
        remote: Option<String>,
        #[arg(long, default_value = "default")]
        model: String,
        #[arg(long, default_value_t = 30.0)]
        timeout_s: f64,
    },
    /// Full pod as JSON.
    Export { pod: PathBuf },
    /// Run the HTTP and WebSocket server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ModeArgs {
    #[arg(long, value_parser = ["real", "mini"], default_value = "real")]
    pub mode: String,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Anchor pose `x,y,z[,qw,qx,qy,qz]`; the recorded anchor when omitted.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Miniature placement pose `x,y,z[,qw,qx,qy,qz]`.
    #[arg(long)]
    pub placement: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MEMORYPOD_ROOT", default_value = "memorypod-data")]
    pub root: PathBuf,
    #[arg(long, env = "MEMORYPOD_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, env = "MEMORYPOD_TICK_HZ", default_value_t = memorypod_server::DEFAULT_TICK_HZ)]
    pub tick_hz: f64,
    #[arg(long, env = "MEMORYPOD_LLM_ENDPOINT")]
    pub llm_endpoint: Option<String>,
    #[arg(long, env = "MEMORYPOD_LLM_MODEL", default_value = "default")]
    pub llm_model: String,
}

fn parse_time(s: &str) -> Result<memorypod::Timestamp, String> {
    if s.contains(':') {
        return memorypod::Timestamp::parse_mmss(s).ok_or_else(|| format!("bad time {s:?}"));
    }
    let secs: f64 = s.parse().map_err(|_| format!("bad time {s:?}"))?;
    if !(secs >= 0.0 && secs.is_finite()) {
        return Err(format!("time must be a non-negative number of seconds, got {s}"));
    }
    Ok(memorypod::Timestamp::from_secs_f64(secs))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = String::new();
    let result = commands::run(&cli, &mut out);
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
            return ExitCode::from(3);
        }
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
