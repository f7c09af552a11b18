//! The MemoryPod data model: one immutable recorded session.

pub mod codec;
mod keyframes;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pose_interpolate, AnchorFrame, Pose, Vec3, Zone};
use crate::time::Timestamp;

pub use keyframes::{build_keyframe_index, Keyframe, KeyframeIndex};
pub use validate::{validate, ValidationReport, Violation, ViolationCode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PodError {
    #[error("annotation id {0} appears more than once")]
    DuplicateAnnotationId(u32),
    #[error("track {0} has no samples")]
    EmptyTrack(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityRole {
    Head,
    LeftHand,
    RightHand,
    Object,
}

impl EntityRole {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityRole::Head => "Head",
            EntityRole::LeftHand => "LeftHand",
            EntityRole::RightHand => "RightHand",
            EntityRole::Object => "Object",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnnotationKind {
    Start,
    End,
    Acquire,
    Use,
    Deposit,
}

impl AnnotationKind {
    pub const ALL: [AnnotationKind; 5] = [
        AnnotationKind::Start,
        AnnotationKind::End,
        AnnotationKind::Acquire,
        AnnotationKind::Use,
        AnnotationKind::Deposit,
    ];

    /// Wire code used by the MPOD annotation section.
    pub fn code(self) -> u8 {
        match self {
            AnnotationKind::Start => 0,
            AnnotationKind::End => 1,
            AnnotationKind::Acquire => 2,
            AnnotationKind::Use => 3,
            AnnotationKind::Deposit => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        AnnotationKind::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationKind::Start => "Start",
            AnnotationKind::End => "End",
            AnnotationKind::Acquire => "Acquire",
            AnnotationKind::Use => "Use",
            AnnotationKind::Deposit => "Deposit",
        }
    }

    /// Case-insensitive name lookup.
    pub fn parse(s: &str) -> Option<Self> {
        AnnotationKind::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    #[serde(rename = "t_us")]
    pub t: Timestamp,
    pub pose: Pose,
}

/// Pose samples of one tracked entity, in the anchor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTrack {
    pub entity_id: u16,
    pub role: EntityRole,
    pub label: String,
    pub samples: Vec<TrackSample>,
}

impl EntityTrack {
    pub fn new(entity_id: u16, role: EntityRole, label: impl Into<String>) -> Self {
        EntityTrack { entity_id, role, label: label.into(), samples: Vec::new() }
    }

    pub fn first_time(&self) -> Option<Timestamp> {
        self.samples.first().map(|s| s.t)
    }

    pub fn last_time(&self) -> Option<Timestamp> {
        self.samples.last().map(|s| s.t)
    }
}

/// Pose of `track` at `t`: exact on sample times, interpolated between them,
/// clamped outside the sampled span.
pub fn sample_at(track: &EntityTrack, t: Timestamp) -> Result<Pose, PodError> {
    let samples = &track.samples;
    if samples.is_empty() {
        return Err(PodError::EmptyTrack(track.entity_id));
    }
    // index of the first sample strictly after t
    let after = samples.partition_point(|s| s.t <= t);
    if after == 0 {
        return Ok(samples[0].pose);
    }
    let before = &samples[after - 1];
    if before.t == t || after == samples.len() {
        return Ok(before.pose);
    }
    let next = &samples[after];
    Ok(pose_interpolate((before.t, &before.pose), (next.t, &next.pose), t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u32,
    pub kind: AnnotationKind,
    pub label: String,
    #[serde(rename = "t_us")]
    pub at: Timestamp,
    #[serde(rename = "p")]
    pub position: Vec3,
    pub entity_ref: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    #[serde(rename = "start_us")]
    pub start: Timestamp,
    #[serde(rename = "end_us")]
    pub end: Timestamp,
    pub speaker: String,
    pub text: String,
}

impl TranscriptSegment {
    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Untextured triangle mesh of the recorded surroundings (anchor frame).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvironmentMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// A complete recorded session.
///
/// All geometry is relative to `anchor`, the calibration marker's pose at
/// record time. `anchor` itself is kept for reference and for reproducing
/// the original world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryPod {
    pub pod_id: String,
    pub title: String,
    pub created_at: String,
    pub anchor: AnchorFrame,
    pub tracks: Vec<EntityTrack>,
    pub annotations: Vec<Annotation>,
    pub transcript: Vec<TranscriptSegment>,
    pub mesh: EnvironmentMesh,
    pub zones: Vec<Zone>,
    /// Set when the End annotation was synthesized from a session-end signal
    /// rather than placed by the user.
    #[serde(default)]
    pub synthetic_end: bool,
}

impl MemoryPod {
    /// Last instant with recorded content; the replay timeline is `[0, duration]`.
    pub fn duration(&self) -> Timestamp {
        let samples = self.tracks.iter().filter_map(EntityTrack::last_time);
        let annotations = self.annotations.iter().map(|a| a.at);
        let transcript = self.transcript.iter().map(|s| s.end);
        samples.chain(annotations).chain(transcript).max().unwrap_or(Timestamp::ZERO)
    }

    /// Earliest and latest sample time over all tracks.
    pub fn sample_span(&self) -> Option<(Timestamp, Timestamp)> {
        let first = self.tracks.iter().filter_map(EntityTrack::first_time).min()?;
        let last = self.tracks.iter().filter_map(EntityTrack::last_time).max()?;
        Some((first, last))
    }

    pub fn annotations_of(&self, kind: AnnotationKind) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(move |a| a.kind == kind)
    }

    pub fn start(&self) -> Option<&Annotation> {
        self.annotations_of(AnnotationKind::Start).next()
    }

    pub fn end(&self) -> Option<&Annotation> {
        self.annotations_of(AnnotationKind::End).next()
    }

    /// `End − Start`, the length of the annotated process.
    pub fn process_duration(&self) -> Option<Timestamp> {
        Some(self.end()?.at.saturating_sub(self.start()?.at))
    }

    pub fn track(&self, entity_id: u16) -> Option<&EntityTrack> {
        self.tracks.iter().find(|t| t.entity_id == entity_id)
    }

    pub fn head_track(&self) -> Option<&EntityTrack> {
        self.tracks.iter().find(|t| t.role == EntityRole::Head && !t.samples.is_empty())
    }

    pub fn annotation(&self, id: u32) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    /// Geometry rounded to the `f32` precision of the MPOD file, so that
    /// decoding an encoded pod reproduces it exactly.
    pub fn quantized(mut self) -> MemoryPod {
        for track in &mut self.tracks {
            for s in &mut track.samples {
                s.pose = s.pose.quantized();
            }
        }
        for a in &mut self.annotations {
            a.position = a.position.quantized();
        }
        for v in &mut self.mesh.vertices {
            *v = v.quantized();
        }
        self
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::geometry::UnitQuat;

    /// Small valid pod: one head track sampled every second for 10 s.
    pub fn minimal_pod() -> MemoryPod {
        let mut head = EntityTrack::new(0, EntityRole::Head, "tech");
        for i in 0..=10u64 {
            head.samples.push(TrackSample {
                t: Timestamp(i * 1_000_000),
                pose: Pose::new(Vec3::new(i as f64 * 0.5, 1.5, 0.25), UnitQuat::from_yaw(i as f64 * 0.1)).quantized(),
            });
        }
        MemoryPod {
            pod_id: "00000000-0000-4000-8000-000000000001".into(),
            title: "minimal".into(),
            created_at: "2024-01-01T00:00:00Z".into(),
            anchor: AnchorFrame::IDENTITY,
            tracks: vec![head],
            annotations: vec![
                Annotation {
                    id: 0,
                    kind: AnnotationKind::Start,
                    label: "begin".into(),
                    at: Timestamp(0),
                    position: Vec3::new(0.5, 1.0, 0.5),
                    entity_ref: Some(0),
                },
                Annotation {
                    id: 1,
                    kind: AnnotationKind::End,
                    label: "finish".into(),
                    at: Timestamp(10_000_000),
                    position: Vec3::new(4.5, 1.0, 0.5),
                    entity_ref: None,
                },
            ],
            transcript: vec![],
            mesh: EnvironmentMesh::default(),
            zones: vec![Zone::new("A", "all", -1.0, 10.0, -1.0, 1.0).unwrap()],
            synthetic_end: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::minimal_pod;
    use super::*;
    use crate::geometry::UnitQuat;

    fn linear_track() -> EntityTrack {
        let mut t = EntityTrack::new(3, EntityRole::Object, "box");
        t.samples.push(TrackSample { t: Timestamp(1_000), pose: Pose::from_position(Vec3::ZERO) });
        t.samples.push(TrackSample { t: Timestamp(3_000), pose: Pose::from_position(Vec3::new(4.0, 0.0, 0.0)) });
        t
    }

    #[test]
    fn sample_at_examples() {
        let tr = linear_track();
        assert_eq!(sample_at(&tr, Timestamp(3_000)).unwrap(), tr.samples[1].pose);
        assert_eq!(sample_at(&tr, Timestamp(0)).unwrap(), tr.samples[0].pose);
        assert_eq!(sample_at(&tr, Timestamp(99_000)).unwrap(), tr.samples[1].pose);
        assert_eq!(sample_at(&tr, Timestamp(2_000)).unwrap().position, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(
            sample_at(&EntityTrack::new(9, EntityRole::Head, ""), Timestamp(0)),
            Err(PodError::EmptyTrack(9))
        );
    }

    #[test]
    fn sample_at_interpolates_orientation() {
        let mut tr = EntityTrack::new(0, EntityRole::Head, "");
        tr.samples.push(TrackSample { t: Timestamp(0), pose: Pose::new(Vec3::ZERO, UnitQuat::IDENTITY) });
        tr.samples.push(TrackSample { t: Timestamp(10), pose: Pose::new(Vec3::ZERO, UnitQuat::from_yaw(1.0)) });
        let mid = sample_at(&tr, Timestamp(5)).unwrap();
        assert!(mid.orientation.approx_same_rotation(UnitQuat::from_yaw(0.5), 1e-12));
    }

    #[test]
    fn annotation_kind_codes() {
        for k in AnnotationKind::ALL {
            assert_eq!(AnnotationKind::from_code(k.code()), Some(k));
            assert_eq!(AnnotationKind::parse(&k.as_str().to_lowercase()), Some(k));
        }
        assert_eq!(AnnotationKind::from_code(5), None);
    }

    #[test]
    fn durations() {
        let pod = minimal_pod();
        assert_eq!(pod.duration(), Timestamp(10_000_000));
        assert_eq!(pod.process_duration(), Some(Timestamp(10_000_000)));
        assert_eq!(pod.sample_span(), Some((Timestamp(0), Timestamp(10_000_000))));
    }
}
