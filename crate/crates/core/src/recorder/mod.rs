//! Turns a stream of capture events into a [`MemoryPod`].
//!
//! Device adapters and the built-in [`simulate`] scenario generator emit the
//! same [`CaptureEvent`]s in world coordinates. The [`RecorderSession`] state
//! machine re-expresses every piece of geometry relative to the detected
//! anchor before storing it.

pub mod capture_log;
pub mod simulate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{to_anchor_frame, AnchorFrame, Pose, Vec3, Zone};
use crate::pod::codec::NO_ENTITY;
use crate::pod::{
    validate, Annotation, AnnotationKind, EntityRole, EntityTrack, EnvironmentMesh, MemoryPod, TrackSample,
    TranscriptSegment, ValidationReport,
};
use crate::time::Timestamp;

pub use capture_log::{read_capture_log, write_capture_log, CaptureHeader, CaptureLog, CaptureLogError};
pub use simulate::{simulate_capture_log, simulate_scenario, Lcg, ScenarioConfig, ScenarioEntity, ScenarioError, ScenarioStep};

/// Marks geometry in capture events as world-frame. It is the only frame a
/// capture log may use; the field exists so logs say so explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    #[default]
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CaptureEvent {
    AnchorDetected {
        coord: Coord,
        pose: Pose,
    },
    DefineEntity {
        entity: u16,
        role: EntityRole,
        label: String,
    },
    SamplePose {
        coord: Coord,
        entity: u16,
        t_us: Timestamp,
        pose: Pose,
    },
    Annotate {
        coord: Coord,
        kind: AnnotationKind,
        label: String,
        t_us: Timestamp,
        p: Vec3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<u16>,
        /// Informational zone hint from the producer; not stored in the pod.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zone: Option<String>,
    },
    Transcript {
        start_us: Timestamp,
        end_us: Timestamp,
        speaker: String,
        text: String,
    },
    MeshSnapshot {
        coord: Coord,
        t_us: Timestamp,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    },
    SessionEnd {
        t_us: Timestamp,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecorderState {
    Created,
    Anchored,
    Recording,
    Finished,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecorderError {
    #[error("geometry or timed event received before the anchor was detected")]
    EventBeforeAnchor,
    #[error("anchor already detected")]
    AnchorAlreadySet,
    #[error("sample for entity {entity} at {t} does not follow {last}")]
    NonMonotonicSample { entity: u16, t: Timestamp, last: Timestamp },
    #[error("unknown entity {0}")]
    UnknownEntity(u16),
    #[error("entity {0} defined twice")]
    DuplicateEntity(u16),
    #[error("entity id 0xFFFF is reserved")]
    ReservedEntityId,
    #[error("{0:?} annotation before the Start annotation")]
    AnnotationBeforeStart(AnnotationKind),
    #[error("second Start annotation")]
    DuplicateStart,
    #[error("transcript segment {start}..{end} overlaps or precedes the previous one")]
    TranscriptOutOfOrder { start: Timestamp, end: Timestamp },
    #[error("session already finished")]
    AlreadyFinished,
    #[error("session is not finished")]
    NotFinished,
    #[error("recorded pod is invalid:\n{0}")]
    InvalidPod(ValidationReport),
}

/// Identity of the pod a session will produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub pod_id: String,
    pub title: String,
    pub created_at: String,
    /// Floor plan of the recorded space, in the anchor frame.
    #[serde(default)]
    pub zones: Vec<Zone>,
}

/// Event-recording state machine.
///
/// Transitions: `Created → Anchored` on `AnchorDetected`, `Anchored →
/// Recording` on the Start annotation, `Recording → Finished` on the End
/// annotation or `SessionEnd`. A rejected event leaves the session unchanged.
#[derive(Debug, Clone)]
pub struct RecorderSession {
    meta: SessionMeta,
    state: RecorderState,
    anchor: Option<AnchorFrame>,
    tracks: Vec<EntityTrack>,
    annotations: Vec<Annotation>,
    transcript: Vec<TranscriptSegment>,
    mesh: EnvironmentMesh,
    synthetic_end: bool,
}

impl RecorderSession {
    pub fn new(meta: SessionMeta) -> Self {
        RecorderSession {
            meta,
            state: RecorderState::Created,
            anchor: None,
            tracks: Vec::new(),
            annotations: Vec::new(),
            transcript: Vec::new(),
            mesh: EnvironmentMesh::default(),
            synthetic_end: false,
        }
    }

    pub fn state(&self) -> RecorderState {
        self.state
    }

    pub fn anchor(&self) -> Option<&AnchorFrame> {
        self.anchor.as_ref()
    }

    pub fn tracks(&self) -> &[EntityTrack] {
        &self.tracks
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn apply(&mut self, ev: &CaptureEvent) -> Result<(), RecorderError> {
        use CaptureEvent::*;

        if self.state == RecorderState::Finished {
            return match ev {
                SessionEnd { .. } => Ok(()),
                _ => Err(RecorderError::AlreadyFinished),
            };
        }

        match ev {
            DefineEntity { entity, role, label } => {
                if *entity == NO_ENTITY {
                    return Err(RecorderError::ReservedEntityId);
                }
                if self.track_slot(*entity).is_some() {
                    return Err(RecorderError::DuplicateEntity(*entity));
                }
                self.tracks.push(EntityTrack::new(*entity, *role, label.clone()));
                Ok(())
            }
            AnchorDetected { pose, .. } => {
                if self.anchor.is_some() {
                    return Err(RecorderError::AnchorAlreadySet);
                }
                self.anchor = Some(AnchorFrame::new(*pose));
                self.state = RecorderState::Anchored;
                Ok(())
            }
            SamplePose { entity, t_us, pose, .. } => {
                let anchor = self.require_anchor()?;
                let slot = self.track_slot(*entity).ok_or(RecorderError::UnknownEntity(*entity))?;
                let track = &mut self.tracks[slot];
                if let Some(last) = track.last_time() {
                    if *t_us <= last {
                        return Err(RecorderError::NonMonotonicSample { entity: *entity, t: *t_us, last });
                    }
                }
                track.samples.push(TrackSample { t: *t_us, pose: to_anchor_frame(&anchor, pose) });
                Ok(())
            }
            Annotate { kind, label, t_us, p, entity, .. } => {
                let anchor = self.require_anchor()?;
                if let Some(e) = entity {
                    self.track_slot(*e).ok_or(RecorderError::UnknownEntity(*e))?;
                }
                match (self.state, kind) {
                    (RecorderState::Anchored, AnnotationKind::Start) => self.state = RecorderState::Recording,
                    (RecorderState::Anchored, k) => return Err(RecorderError::AnnotationBeforeStart(*k)),
                    (_, AnnotationKind::Start) => return Err(RecorderError::DuplicateStart),
                    (_, AnnotationKind::End) => self.state = RecorderState::Finished,
                    _ => {}
                }
                let position = to_anchor_frame(&anchor, &Pose::from_position(*p)).position;
                self.push_annotation(*kind, label.clone(), *t_us, position, *entity);
                Ok(())
            }
            Transcript { start_us, end_us, speaker, text } => {
                self.require_anchor()?;
                let after_prev = self.transcript.last().is_none_or(|s| *start_us >= s.end);
                if start_us > end_us || !after_prev {
                    return Err(RecorderError::TranscriptOutOfOrder { start: *start_us, end: *end_us });
                }
                self.transcript.push(TranscriptSegment {
                    start: *start_us,
                    end: *end_us,
                    speaker: speaker.clone(),
                    text: text.clone(),
                });
                Ok(())
            }
            MeshSnapshot { vertices, triangles, .. } => {
                let anchor = self.require_anchor()?;
                self.mesh = EnvironmentMesh {
                    vertices: vertices
                        .iter()
                        .map(|v| to_anchor_frame(&anchor, &Pose::from_position(*v)).position)
                        .collect(),
                    triangles: triangles.clone(),
                };
                Ok(())
            }
            SessionEnd { t_us } => {
                self.require_anchor()?;
                if self.state == RecorderState::Recording {
                    self.synthesize_end(*t_us);
                }
                self.state = RecorderState::Finished;
                Ok(())
            }
        }
    }

    /// Builds the pod. Pure: calling it repeatedly yields identical pods.
    pub fn finalize(&self) -> Result<MemoryPod, RecorderError> {
        if self.state != RecorderState::Finished {
            return Err(RecorderError::NotFinished);
        }
        let pod = MemoryPod {
            pod_id: self.meta.pod_id.clone(),
            title: self.meta.title.clone(),
            created_at: self.meta.created_at.clone(),
            anchor: self.anchor.unwrap_or_default(),
            tracks: self.tracks.clone(),
            annotations: self.annotations.clone(),
            transcript: self.transcript.clone(),
            mesh: self.mesh.clone(),
            zones: self.meta.zones.clone(),
            synthetic_end: self.synthetic_end,
        }
        .quantized();
        let report = validate(&pod);
        if !report.is_empty() {
            return Err(RecorderError::InvalidPod(report));
        }
        Ok(pod)
    }

    fn require_anchor(&self) -> Result<AnchorFrame, RecorderError> {
        self.anchor.ok_or(RecorderError::EventBeforeAnchor)
    }

    fn track_slot(&self, entity: u16) -> Option<usize> {
        self.tracks.iter().position(|t| t.entity_id == entity)
    }

    fn push_annotation(
        &mut self,
        kind: AnnotationKind,
        label: String,
        at: Timestamp,
        position: Vec3,
        entity_ref: Option<u16>,
    ) {
        let id = self.annotations.len() as u32;
        self.annotations.push(Annotation { id, kind, label, at, position, entity_ref });
    }

    /// End annotation at the last recorded sample, placed at the head.
    fn synthesize_end(&mut self, fallback: Timestamp) {
        let at = self.tracks.iter().filter_map(EntityTrack::last_time).max().unwrap_or(fallback);
        let head = self.tracks.iter().find(|t| t.role == EntityRole::Head && !t.samples.is_empty());
        let position = head.and_then(|h| h.samples.last()).map_or(Vec3::ZERO, |s| s.pose.position);
        let entity_ref = head.map(|h| h.entity_id);
        self.push_annotation(AnnotationKind::End, "session end".into(), at, position, entity_ref);
        self.synthetic_end = true;
    }
}

/// Folds a full event stream into a finalized pod.
pub fn record(meta: SessionMeta, events: &[CaptureEvent]) -> Result<MemoryPod, RecordError> {
    let mut session = RecorderSession::new(meta);
    for (i, ev) in events.iter().enumerate() {
        session.apply(ev).map_err(|source| RecordError { event: Some(i), source })?;
    }
    session.finalize().map_err(|source| RecordError { event: None, source })
}

/// A [`RecorderError`] together with the index of the offending event, if any.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{source}", .event.map(|i| format!("event {i}: ")).unwrap_or_default())]
pub struct RecordError {
    pub event: Option<usize>,
    #[source]
    pub source: RecorderError,
}

/// Thins a track so that kept samples are at least `1/target_hz` apart.
///
/// The first and last samples are always kept. Timestamps are whole
/// microseconds, so the interval is rounded down to a whole microsecond.
/// A non-positive or non-finite rate leaves the track unchanged.
pub fn downsample(track: &EntityTrack, target_hz: f64) -> EntityTrack {
    let mut out = EntityTrack { samples: Vec::new(), ..track.clone() };
    if !(target_hz > 0.0 && target_hz.is_finite()) || track.samples.len() <= 2 {
        out.samples = track.samples.clone();
        return out;
    }
    let interval = (1e6 / target_hz).floor() as u64;
    let (last, body) = track.samples.split_last().unwrap();
    let mut kept_t: Option<Timestamp> = None;
    for s in body {
        if kept_t.is_none_or(|k| s.t.as_micros() - k.as_micros() >= interval) {
            out.samples.push(*s);
            kept_t = Some(s.t);
        }
    }
    out.samples.push(*last);
    out
}
