use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use memorypod::narrative::{summarize, HttpChatClient, Summary, SummarizerBackend};
use memorypod::pod::codec::{decode_pod, encode_pod, CodecError};
use memorypod::recorder::{read_capture_log, record, simulate_capture_log, write_capture_log, CaptureLogError, ScenarioConfig};
use memorypod::replay::{open_session, FrameState};
use memorypod::MemoryPod;
use memorypod_server::views::{keyframe_views, pod_info, ModeSpec};
use memorypod_server::{codec_error_code, ServerConfig, ServerError};
use serde::Serialize;
use serde_json::json;

use crate::{Cli, Command, Format, ModeArgs, ServeArgs};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Invalid(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) | Failure::Io(m) => m,
        }
    }
}

impl From<std::fmt::Error> for Failure {
    fn from(e: std::fmt::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn codec_failure(path: &Path, e: CodecError) -> Failure {
    match e {
        CodecError::InvalidPod(report) => Failure::Invalid(format!("{}: invalid pod\n{report}", path.display())),
        other => Failure::Invalid(format!("{}: {}: {other}", path.display(), codec_error_code(&other))),
    }
}

fn load_pod(path: &Path) -> Result<MemoryPod, Failure> {
    decode_pod(&read(path)?).map_err(|e| codec_failure(path, e))
}

fn json_to<T: Serialize>(w: &mut String, value: &T) -> Outcome {
    writeln!(w, "{}", serde_json::to_string_pretty(value).expect("serializable output"))?;
    Ok(())
}

/// Runs one subcommand, appending its stdout output to `w`.
pub fn run(cli: &Cli, w: &mut String) -> Outcome {
    let fmt = cli.format;
    match &cli.command {
        Command::Simulate { config, seed, out } => simulate(w, fmt, config.as_deref(), *seed, out),
        Command::Ingest { capture, out, pod_id } => ingest(w, fmt, capture, out, pod_id.clone()),
        Command::Validate { pod } => validate(w, fmt, pod),
        Command::Info { pod } => info(w, fmt, pod),
        Command::Keyframes { pod } => keyframes(w, fmt, pod),
        Command::Frame { pod, t, mode } => frame(w, fmt, pod, *t, mode),
        Command::Summarize { pod, remote, model, timeout_s, .. } => {
            summarize_cmd(w, fmt, cli.quiet, pod, remote.as_deref(), model, *timeout_s)
        }
        Command::Export { pod } => json_to(w, &load_pod(pod)?),
        Command::Serve(args) => serve(cli.quiet, args),
    }
}

fn simulate(w: &mut String, fmt: Format, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Outcome {
    let mut cfg = match config {
        Some(path) => serde_json::from_slice::<ScenarioConfig>(&read(path)?)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?,
        None => ScenarioConfig::hard_drive_replacement(seed.unwrap_or(0)),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let log = simulate_capture_log(&cfg).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut buf = Vec::new();
    write_capture_log(&mut buf, &log).map_err(|e| Failure::Io(e.to_string()))?;
    write(out, &buf)?;
    match fmt {
        Format::Json => json_to(w, &json!({"out": out, "events": log.events.len(), "seed": cfg.seed}))?,
        Format::Text => writeln!(w, "wrote {} events to {}", log.events.len(), out.display())?,
    }
    Ok(())
}

fn ingest(w: &mut String, fmt: Format, capture: &Path, out: &Path, pod_id: Option<String>) -> Outcome {
    let bytes = read(capture)?;
    let log = read_capture_log(BufReader::new(&bytes[..])).map_err(|e| match e {
        CaptureLogError::Io(e) => io_err(capture, e),
        other => Failure::Invalid(format!("{}: {other}", capture.display())),
    })?;
    let derived = uuid::Uuid::new_v5(&uuid::Uuid::NAMESPACE_OID, &bytes).to_string();
    let mut meta = log.session_meta(derived);
    if let Some(id) = pod_id {
        meta.pod_id = id;
    }
    let pod = record(meta, &log.events).map_err(|e| Failure::Invalid(format!("{}: {e}", capture.display())))?;
    let encoded = encode_pod(&pod).map_err(|e| codec_failure(out, e))?;
    write(out, &encoded)?;
    match fmt {
        Format::Json => json_to(
            w,
            &json!({
                "pod_id": pod.pod_id,
                "out": out,
                "bytes": encoded.len(),
                "annotations": pod.annotations.len(),
            }),
        )?,
        Format::Text => writeln!(
            w,
            "{} -> {} ({} bytes, {} annotations)",
            pod.pod_id,
            out.display(),
            encoded.len(),
            pod.annotations.len()
        )?,
    }
    Ok(())
}

fn validate(w: &mut String, fmt: Format, path: &Path) -> Outcome {
    match decode_pod(&read(path)?) {
        Ok(pod) => match fmt {
            Format::Json => json_to(w, &json!({"valid": true, "pod_id": pod.pod_id})),
            Format::Text => Ok(writeln!(w, "{}: ok", path.display())?),
        },
        Err(e) => {
            if fmt == Format::Json {
                let report = match &e {
                    CodecError::InvalidPod(r) => serde_json::to_value(r).ok(),
                    _ => None,
                };
                json_to(w, &json!({"valid": false, "error": codec_error_code(&e), "report": report}))?;
            }
            Err(codec_failure(path, e))
        }
    }
}

fn info(w: &mut String, fmt: Format, path: &Path) -> Outcome {
    let pod = load_pod(path)?;
    let info = pod_info(&pod.pod_id, &pod);
    if fmt == Format::Json {
        return json_to(w, &info);
    }
    writeln!(w, "pod       {}", info.pod_id)?;
    writeln!(w, "title     {}", info.title)?;
    writeln!(w, "created   {}", info.created_at)?;
    writeln!(w, "duration  {} (process {})", info.duration_us.mmss(), info.process_duration_us.mmss())?;
    writeln!(w, "events    {} annotations, {} transcript segments", info.annotation_count, info.transcript_segments)?;
    for e in &info.entities {
        writeln!(w, "entity    {} {} {:?} ({} samples)", e.id, e.role.as_str(), e.label, e.samples)?;
    }
    writeln!(w, "zones     {}", info.zones.join(" "))?;
    Ok(())
}

fn keyframes(w: &mut String, fmt: Format, path: &Path) -> Outcome {
    let views = keyframe_views(&load_pod(path)?);
    if fmt == Format::Json {
        return json_to(w, &views);
    }
    for k in &views {
        writeln!(w, "{} #{} {} {}", k.t_us.mmss(), k.annotation_id, k.kind.as_str(), k.label)?;
    }
    Ok(())
}

fn frame(w: &mut String, fmt: Format, path: &Path, t: memorypod::Timestamp, args: &ModeArgs) -> Outcome {
    let pod = Arc::new(load_pod(path)?);
    let spec = ModeSpec {
        mode: Some(args.mode.clone()),
        scale: args.scale,
        anchor: args.anchor.clone(),
        placement: args.placement.clone(),
    };
    let mode = spec.resolve(&pod).map_err(Failure::Usage)?;
    let session = open_session(pod, mode).map_err(|e| Failure::Invalid(e.to_string()))?;
    let f = session.frame_at(t).map_err(|e| Failure::Usage(e.to_string()))?;
    match fmt {
        Format::Json => json_to(w, &f),
        Format::Text => write_frame(w, &f),
    }
}

fn write_frame(w: &mut String, f: &FrameState) -> Outcome {
    writeln!(w, "t {}", f.t)?;
    for e in &f.entities {
        let [qw, qx, qy, qz] = e.q.to_array();
        let p = e.p;
        writeln!(
            w,
            "{} {:<9} p ({:.4}, {:.4}, {:.4}) q ({qw:.4}, {qx:.4}, {qy:.4}, {qz:.4})",
            e.entity_id,
            e.role.as_str(),
            p.x,
            p.y,
            p.z
        )?;
    }
    write!(w, "fov")?;
    for v in f.fov {
        write!(w, " ({:.4}, {:.4}, {:.4})", v.x, v.y, v.z)?;
    }
    writeln!(w)?;
    for pin in &f.pins {
        writeln!(w, "annotation #{} {} {}", pin.id, pin.kind.as_str(), pin.label)?;
    }
    if let Some(s) = &f.transcript {
        writeln!(w, "{}: {}", s.speaker, s.text)?;
    }
    Ok(())
}

fn summarize_cmd(
    w: &mut String,
    fmt: Format,
    quiet: bool,
    path: &Path,
    remote: Option<&str>,
    model: &str,
    timeout_s: f64,
) -> Outcome {
    let pod = load_pod(path)?;
    let backend = match remote {
        Some(url) => {
            if !(timeout_s > 0.0 && timeout_s.is_finite()) {
                return Err(Failure::Usage(format!("timeout must be positive, got {timeout_s}")));
            }
            let client = HttpChatClient::from_env(url, model).with_timeout(Duration::from_secs_f64(timeout_s));
            SummarizerBackend::Remote(Arc::new(client))
        }
        None => SummarizerBackend::Template,
    };
    let summary = summarize(&pod, &backend);
    if !quiet {
        for warning in &summary.warnings {
            eprintln!("warning: {warning}");
        }
    }
    match fmt {
        Format::Json => json_to(w, &summary),
        Format::Text => write_summary(w, &summary),
    }
}

fn write_summary(w: &mut String, s: &Summary) -> Outcome {
    writeln!(w, "{}", s.overview)?;
    writeln!(w)?;
    for e in &s.key_events {
        writeln!(w, "{} {:<7} {}", e.time, e.kind.as_str(), e.label)?;
    }
    if !s.tools.is_empty() {
        writeln!(w)?;
        writeln!(w, "tools: {}", s.tools.join(", "))?;
    }
    Ok(())
}

fn serve(quiet: bool, args: &ServeArgs) -> Outcome {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(if quiet { "warn" } else { "info" }));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    let config = ServerConfig {
        root: args.root.clone(),
        bind: args.bind,
        tick_hz: args.tick_hz,
        llm_endpoint: args.llm_endpoint.clone(),
        llm_model: args.llm_model.clone(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime.block_on(memorypod_server::serve(config)).map_err(|e| match e {
        ServerError::InvalidTick(_) => Failure::Usage(e.to_string()),
        other => Failure::Io(other.to_string()),
    })
}
