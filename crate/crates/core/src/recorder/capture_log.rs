//! `.mpcap` capture logs: UTF-8 JSON lines.
//!
//! The first line is a header record (`"type": "header"`) declaring the
//! coordinate conventions, session metadata and the floor plan. Every
//! following line is one [`CaptureEvent`], discriminated by `"type"`, with
//! times in microseconds (`t_us`, `start_us`, `end_us`) and geometry tagged
//! `"coord": "world"`. Blank lines are ignored.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CaptureEvent, SessionMeta};
use crate::geometry::Zone;
use crate::pod::codec::CoordinateSystem;

pub const FORMAT: &str = "mpcap";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CaptureLogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("capture log does not start with a header record")]
    MissingHeader,
    #[error("unsupported capture format {format:?} version {version}")]
    UnsupportedFormat { format: String, version: u32 },
    #[error("unsupported coordinate conventions {0:?}")]
    UnsupportedCoordinates(CoordinateSystem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureHeader {
    pub format: String,
    pub version: u32,
    pub title: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pod_id: Option<String>,
    pub coordinates: CoordinateSystem,
    #[serde(default)]
    pub zones: Vec<Zone>,
}

impl CaptureHeader {
    pub fn new(title: impl Into<String>, created_at: impl Into<String>, zones: Vec<Zone>) -> Self {
        CaptureHeader {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            title: title.into(),
            created_at: created_at.into(),
            pod_id: None,
            coordinates: CoordinateSystem::default(),
            zones,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureLog {
    pub header: CaptureHeader,
    pub events: Vec<CaptureEvent>,
}

impl CaptureLog {
    /// Metadata for a recorder session; `default_pod_id` is used when the
    /// header does not name one.
    pub fn session_meta(&self, default_pod_id: impl Into<String>) -> SessionMeta {
        SessionMeta {
            pod_id: self.header.pod_id.clone().unwrap_or_else(|| default_pod_id.into()),
            title: self.header.title.clone(),
            created_at: self.header.created_at.clone(),
            zones: self.header.zones.clone(),
        }
    }
}

pub fn write_capture_log<W: Write>(mut w: W, log: &CaptureLog) -> io::Result<()> {
    let mut header = serde_json::to_value(&log.header)?;
    if let Some(obj) = header.as_object_mut() {
        obj.insert("type".into(), "header".into());
    }
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for ev in &log.events {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_capture_log<R: BufRead>(r: R) -> Result<CaptureLog, CaptureLogError> {
    let mut header: Option<CaptureHeader> = None;
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| CaptureLogError::Parse { line: i + 1, message: e.to_string() };
        if header.is_none() {
            let mut value: serde_json::Value = serde_json::from_str(&line).map_err(parse_err)?;
            let obj = value.as_object_mut().ok_or(CaptureLogError::MissingHeader)?;
            if obj.remove("type").and_then(|t| t.as_str().map(str::to_owned)).as_deref() != Some("header") {
                return Err(CaptureLogError::MissingHeader);
            }
            let h: CaptureHeader = serde_json::from_value(value).map_err(parse_err)?;
            if h.format != FORMAT || h.version != FORMAT_VERSION {
                return Err(CaptureLogError::UnsupportedFormat { format: h.format, version: h.version });
            }
            if h.coordinates != CoordinateSystem::default() {
                return Err(CaptureLogError::UnsupportedCoordinates(h.coordinates));
            }
            header = Some(h);
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(parse_err)?);
    }
    Ok(CaptureLog { header: header.ok_or(CaptureLogError::MissingHeader)?, events })
}
