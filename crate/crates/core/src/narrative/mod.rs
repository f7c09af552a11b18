//! Structured summaries of a recorded session.
//!
//! [`build_digest`] flattens a pod into time-ordered text lines. A
//! [`SummarizerBackend`] turns that into a [`Summary`], either from a
//! chat-completion endpoint or from [`template_summary`], which is also the
//! fallback whenever the remote call fails or its reply does not parse.

mod remote;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::zone_of;
use crate::pod::{AnnotationKind, MemoryPod};
use crate::time::Timestamp;

pub use remote::{CompletionClient, CompletionError, CompletionLimits, HttpChatClient, DEFAULT_TIMEOUT, TOKEN_ENV};

/// Time-ordered text lines, one per annotation and transcript segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digest {
    pub lines: Vec<String>,
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

pub fn build_digest(pod: &MemoryPod) -> Digest {
    // (time, annotations before transcript, source order, line)
    let mut entries: Vec<(Timestamp, u8, usize, String)> = Vec::new();
    for (i, a) in pod.annotations.iter().enumerate() {
        let zone = zone_of(&pod.zones, a.position).map_or("unzoned", |z| z.id.as_str());
        entries.push((a.at, 0, i, format!("[{}] EVENT {} {} @ {}", a.at.mmss(), a.kind.as_str(), a.label, zone)));
    }
    for (i, s) in pod.transcript.iter().enumerate() {
        entries.push((s.start, 1, i, format!("[{}] {}: {}", s.start.mmss(), s.speaker, s.text)));
    }
    entries.sort_by_key(|e| (e.0, e.1, e.2));
    Digest { lines: entries.into_iter().map(|e| e.3).collect() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    Template,
    RemoteModel { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEvent {
    /// `mm:ss`
    pub time: String,
    pub kind: AnnotationKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub overview: String,
    pub duration_s: f64,
    pub key_events: Vec<KeyEvent>,
    /// Distinct Acquire labels in order of first acquisition.
    pub tools: Vec<String>,
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn tools_of(pod: &MemoryPod) -> Vec<String> {
    let mut tools: Vec<String> = Vec::new();
    for a in sorted_annotations(pod) {
        if a.kind == AnnotationKind::Acquire && !tools.contains(&a.label) {
            tools.push(a.label.clone());
        }
    }
    tools
}

fn sorted_annotations(pod: &MemoryPod) -> Vec<&crate::pod::Annotation> {
    let mut v: Vec<_> = pod.annotations.iter().collect();
    v.sort_by_key(|a| (a.at, a.id));
    v
}

/// Deterministic summary built only from the pod's annotations.
pub fn template_summary(pod: &MemoryPod) -> Summary {
    let start = pod.start().map_or(Timestamp::ZERO, |a| a.at);
    let end = pod.end().map_or(start, |a| a.at);
    let span = end.saturating_sub(start);
    let actions = pod
        .annotations
        .iter()
        .filter(|a| matches!(a.kind, AnnotationKind::Acquire | AnnotationKind::Use | AnnotationKind::Deposit))
        .count();
    Summary {
        overview: format!(
            "Process '{}' ran {} from {} to {}, involving {} annotated actions.",
            pod.title,
            span.mmss(),
            start.mmss(),
            end.mmss(),
            actions
        ),
        duration_s: span.as_secs_f64(),
        key_events: sorted_annotations(pod)
            .into_iter()
            .map(|a| KeyEvent { time: a.at.mmss(), kind: a.kind, label: a.label.clone() })
            .collect(),
        tools: tools_of(pod),
        generator: Generator::Template,
        warnings: Vec::new(),
    }
}

/// Fixed instructions sent ahead of the digest.
pub const INSTRUCTIONS: &str = "\
You summarise a recorded hands-on work session for someone reviewing it later.
The session log follows, one line per event or utterance, prefixed with [mm:ss].
Reply using exactly these lines and nothing else:
OVERVIEW: <two or three sentences describing what was done>
DURATION: <length of the process in seconds, as a number>
EVENT: <mm:ss> | <Start|End|Acquire|Use|Deposit> | <label>
Repeat the EVENT line for every key event, in time order.";

pub fn build_prompt(pod: &MemoryPod) -> String {
    format!("{INSTRUCTIONS}\n\nSession: {}\n\n{}", pod.title, build_digest(pod))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub overview: String,
    pub duration_s: f64,
    pub key_events: Vec<KeyEvent>,
}

/// Strict parser for the reply grammar in [`INSTRUCTIONS`]. Any line that is
/// not blank and not one of the three fields rejects the whole reply.
pub fn parse_reply(text: &str) -> Result<ParsedReply, String> {
    let mut overview = None;
    let mut duration = None;
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| format!("line {}: no field name", n + 1))?;
        let value = value.trim();
        match key.trim() {
            "OVERVIEW" if overview.is_none() && !value.is_empty() => overview = Some(value.to_owned()),
            "DURATION" if duration.is_none() => {
                let d: f64 = value
                    .trim_end_matches('s')
                    .trim()
                    .parse()
                    .map_err(|_| format!("line {}: bad duration {value:?}", n + 1))?;
                if !(d.is_finite() && d >= 0.0) {
                    return Err(format!("line {}: bad duration {value:?}", n + 1));
                }
                duration = Some(d);
            }
            "EVENT" => {
                let parts: Vec<&str> = value.split('|').map(str::trim).collect();
                let [time, kind, label] = parts[..] else {
                    return Err(format!("line {}: expected three event fields", n + 1));
                };
                let t = Timestamp::parse_mmss(time).ok_or_else(|| format!("line {}: bad time {time:?}", n + 1))?;
                let kind = AnnotationKind::parse(kind).ok_or_else(|| format!("line {}: bad kind {kind:?}", n + 1))?;
                if label.is_empty() {
                    return Err(format!("line {}: empty label", n + 1));
                }
                events.push((t, KeyEvent { time: t.mmss(), kind, label: label.to_owned() }));
            }
            other => return Err(format!("line {}: unexpected field {other:?}", n + 1)),
        }
    }
    if events.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err("events out of time order".into());
    }
    Ok(ParsedReply {
        overview: overview.ok_or("missing OVERVIEW")?,
        duration_s: duration.ok_or("missing DURATION")?,
        key_events: events.into_iter().map(|e| e.1).collect(),
    })
}

#[derive(Clone)]
pub enum SummarizerBackend {
    Template,
    Remote(Arc<dyn CompletionClient>),
}

impl fmt::Debug for SummarizerBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummarizerBackend::Template => write!(f, "Template"),
            SummarizerBackend::Remote(c) => write!(f, "Remote({})", c.model()),
        }
    }
}

/// Summarises `pod` with `backend`. Never fails: remote errors and
/// unparseable replies yield the template summary with a warning.
pub fn summarize(pod: &MemoryPod, backend: &SummarizerBackend) -> Summary {
    let client = match backend {
        SummarizerBackend::Template => return template_summary(pod),
        SummarizerBackend::Remote(c) => c,
    };
    let prompt = build_prompt(pod);
    let limits = CompletionLimits::default();
    let reply = client.complete(&prompt, &limits).or_else(|_| client.complete(&prompt, &limits));
    let warning = match reply {
        Ok(text) => match parse_reply(&text) {
            Ok(parsed) => {
                return Summary {
                    overview: parsed.overview,
                    duration_s: parsed.duration_s,
                    key_events: parsed.key_events,
                    tools: tools_of(pod),
                    generator: Generator::RemoteModel { name: client.model().to_owned() },
                    warnings: Vec::new(),
                }
            }
            Err(e) => format!("unparseable reply from {}: {e}", client.model()),
        },
        Err(CompletionError::Timeout) => format!("remote backend {} timed out", client.model()),
        Err(e) => format!("remote backend {} failed: {e}", client.model()),
    };
    let mut summary = template_summary(pod);
    summary.warnings.push(warning);
    summary
}
