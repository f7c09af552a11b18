//! Playback of a recorded pod at real scale or in miniature.
//!
//! A [`ReplaySession`] owns a cursor on the pod's `[0, duration]` timeline and
//! turns it into [`FrameState`]s: world poses for every tracked entity, the
//! head's view triangle, the annotations near the cursor and the transcript
//! line being spoken. The clock is driven by the caller through
//! [`ReplaySession::advance`].

mod metrics;
mod shelf;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{apply_miniature, fov_footprint, from_anchor_frame, AnchorFrame, FovConfig, MiniaturePlacement, Pose, UnitQuat, Vec3};
use crate::pod::{build_keyframe_index, sample_at, validate, AnnotationKind, EntityRole, KeyframeIndex, MemoryPod, TranscriptSegment, ValidationReport};
use crate::time::Timestamp;

pub use metrics::{area_accuracy, mean_time_offset, MetricError, RecallResponse};
pub use shelf::{PodShelf, ShelfId};

pub const DEFAULT_WINDOW: Timestamp = Timestamp(1_000_000);

/// How anchor-relative geometry is placed in the viewer's world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum ReplayMode {
    /// Original scale, re-anchored on the marker as detected by the viewer.
    #[serde(rename = "real")]
    RealScale { anchor: AnchorFrame },
    #[serde(rename = "mini")]
    Miniature(MiniaturePlacement),
}

impl ReplayMode {
    pub fn real(anchor: AnchorFrame) -> Self {
        ReplayMode::RealScale { anchor }
    }

    pub fn scale(&self) -> f64 {
        match self {
            ReplayMode::RealScale { .. } => 1.0,
            ReplayMode::Miniature(m) => m.scale(),
        }
    }

    /// Maps an anchor-relative pose into the viewer's world.
    pub fn place(&self, rel: &Pose) -> Pose {
        match self {
            ReplayMode::RealScale { anchor } => from_anchor_frame(anchor, rel),
            ReplayMode::Miniature(m) => apply_miniature(m, rel),
        }
    }

    pub fn place_point(&self, p: Vec3) -> Vec3 {
        self.place(&Pose::from_position(p)).position
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Next,
    Prev,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("pod failed validation: {0}")]
    InvalidPod(ValidationReport),
    #[error("time {t} outside replay range [0, {duration}]")]
    OutOfRange { t: Timestamp, duration: Timestamp },
    #[error("pod has no keyframes")]
    NoKeyframes,
    #[error("playback rate must be positive and finite, got {0}")]
    InvalidRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityPose {
    #[serde(rename = "id")]
    pub entity_id: u16,
    pub role: EntityRole,
    pub p: Vec3,
    pub q: UnitQuat,
}

impl EntityPose {
    pub fn pose(&self) -> Pose {
        Pose::new(self.p, self.q)
    }
}

/// An active annotation placed in the viewer's world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationPin {
    pub id: u32,
    pub kind: AnnotationKind,
    pub label: String,
    pub p: Vec3,
}

/// World-space snapshot of the replay at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    #[serde(rename = "t_us")]
    pub t: Timestamp,
    /// One entry per track with at least one sample, in pod order.
    pub entities: Vec<EntityPose>,
    /// `[apex, left, right]` of the head's view triangle.
    pub fov: [Vec3; 3],
    /// Ids of annotations within the session window of `t`, ascending.
    pub active_annotations: Vec<u32>,
    pub pins: Vec<AnnotationPin>,
    pub transcript: Option<TranscriptSegment>,
}

impl FrameState {
    pub fn entity(&self, id: u16) -> Option<&EntityPose> {
        self.entities.iter().find(|e| e.entity_id == id)
    }
}

#[derive(Debug, Clone)]
pub struct ReplaySession {
    pod: Arc<MemoryPod>,
    keyframes: KeyframeIndex,
    mode: ReplayMode,
    cursor: Timestamp,
    rate: f64,
    playing: bool,
    window: Timestamp,
    fov: FovConfig,
}

/// Opens a paused session at `t = 0` with rate 1.
pub fn open_session(pod: impl Into<Arc<MemoryPod>>, mode: ReplayMode) -> Result<ReplaySession, ReplayError> {
    let pod = pod.into();
    let report = validate(&pod);
    if !report.is_empty() {
        return Err(ReplayError::InvalidPod(report));
    }
    // a valid pod has unique annotation ids
    let keyframes = build_keyframe_index(&pod.annotations).expect("validated pod has unique annotation ids");
    Ok(ReplaySession {
        pod,
        keyframes,
        mode,
        cursor: Timestamp::ZERO,
        rate: 1.0,
        playing: false,
        window: DEFAULT_WINDOW,
        fov: FovConfig::default(),
    })
}

impl ReplaySession {
    pub fn with_window(mut self, window: Timestamp) -> Self {
        self.window = window;
        self
    }

    pub fn with_fov(mut self, fov: FovConfig) -> Self {
        self.fov = fov;
        self
    }

    pub fn pod(&self) -> &Arc<MemoryPod> {
        &self.pod
    }

    pub fn keyframes(&self) -> &KeyframeIndex {
        &self.keyframes
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn cursor(&self) -> Timestamp {
        self.cursor
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_playing(&self) -> bool {
        self.playing
    }

    pub fn window(&self) -> Timestamp {
        self.window
    }

    pub fn duration(&self) -> Timestamp {
        self.pod.duration()
    }

    pub fn frame_at(&self, t: Timestamp) -> Result<FrameState, ReplayError> {
        let duration = self.duration();
        if t > duration {
            return Err(ReplayError::OutOfRange { t, duration });
        }
        Ok(self.frame_unchecked(t))
    }

    pub fn current_frame(&self) -> FrameState {
        self.frame_unchecked(self.cursor)
    }

    fn frame_unchecked(&self, t: Timestamp) -> FrameState {
        let pod = &*self.pod;
        let mut entities = Vec::with_capacity(pod.tracks.len());
        let mut head = None;
        for track in &pod.tracks {
            let Ok(rel) = sample_at(track, t) else { continue };
            let world = self.mode.place(&rel);
            if track.role == EntityRole::Head && head.is_none() {
                head = Some(world);
            }
            entities.push(EntityPose { entity_id: track.entity_id, role: track.role, p: world.position, q: world.orientation });
        }
        let head = head.unwrap_or_else(|| self.mode.place(&Pose::IDENTITY));
        let fov = fov_footprint(&head, self.fov.half_angle, self.fov.depth * self.mode.scale());

        let mut active: Vec<_> = pod.annotations.iter().filter(|a| a.at.abs_diff(t) <= self.window.as_micros()).collect();
        active.sort_by_key(|a| a.id);
        let pins = active
            .iter()
            .map(|a| AnnotationPin { id: a.id, kind: a.kind, label: a.label.clone(), p: self.mode.place_point(a.position) })
            .collect();

        FrameState {
            t,
            entities,
            fov,
            active_annotations: active.iter().map(|a| a.id).collect(),
            pins,
            transcript: pod.transcript.iter().find(|s| s.contains(t)).cloned(),
        }
    }

    /// Moves the cursor by `rate × wall_dt` seconds while playing, pausing on
    /// reaching the end. A paused session is left where it is.
    pub fn advance(&mut self, wall_dt: f64) -> FrameState {
        if self.playing {
            let duration = self.duration();
            let step = self.rate * wall_dt * 1e6;
            if step.is_finite() && step > 0.0 {
                let step = step.round().min(u64::MAX as f64) as u64;
                self.cursor = Timestamp(self.cursor.as_micros().saturating_add(step)).min(duration);
            }
            if self.cursor >= duration {
                self.playing = false;
            }
        }
        self.current_frame()
    }

    /// Moves the cursor to the nearest keyframe strictly after (or before)
    /// it, or leaves it in place when there is none.
    pub fn jump_keyframe(&mut self, direction: Direction) -> Result<Timestamp, ReplayError> {
        if self.keyframes.is_empty() {
            return Err(ReplayError::NoKeyframes);
        }
        let target = match direction {
            Direction::Next => self.keyframes.next_after(self.cursor),
            Direction::Prev => self.keyframes.prev_before(self.cursor),
        };
        if let Some(t) = target {
            self.cursor = t;
        }
        Ok(self.cursor)
    }

    pub fn seek(&mut self, t: Timestamp) -> Result<FrameState, ReplayError> {
        let frame = self.frame_at(t)?;
        self.cursor = t;
        Ok(frame)
    }

    pub fn set_rate(&mut self, rate: f64) -> Result<(), ReplayError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(ReplayError::InvalidRate(rate));
        }
        self.rate = rate;
        Ok(())
    }

    pub fn play(&mut self) {
        self.playing = true;
    }

    pub fn pause(&mut self) {
        self.playing = false;
    }

    pub fn set_mode(&mut self, mode: ReplayMode) {
        self.mode = mode;
    }
}
