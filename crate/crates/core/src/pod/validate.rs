use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotationKind, EntityRole, MemoryPod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    NonMonotonicTrack,
    MissingStart,
    MissingEnd,
    DuplicateStart,
    DuplicateEnd,
    StartAfterEnd,
    AnnotationOutOfRange,
    DuplicateAnnotationId,
    DanglingEntityRef,
    DuplicateEntityId,
    MissingHeadTrack,
    BadQuaternion,
    NonFiniteValue,
    BadMeshIndex,
    OverlappingTranscript,
    InvalidZone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

/// Outcome of [`validate`]; empty means the pod is well formed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct codes present, in declaration order.
    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn contains(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, detail: impl Into<String>) {
        self.violations.push(Violation { code, detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{:?}: {}", v.code, v.detail)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a pod. Never fails; problems are
/// returned as data.
pub fn validate(pod: &MemoryPod) -> ValidationReport {
    let mut r = ValidationReport::default();

    let anchor = pod.anchor.pose;
    if !anchor.position.is_finite() {
        r.push(ViolationCode::NonFiniteValue, "anchor position");
    }
    if !anchor.orientation.is_unit() {
        r.push(ViolationCode::BadQuaternion, "anchor orientation");
    }

    let mut entity_ids = HashSet::new();
    for track in &pod.tracks {
        if !entity_ids.insert(track.entity_id) {
            r.push(ViolationCode::DuplicateEntityId, format!("entity {}", track.entity_id));
        }
        for pair in track.samples.windows(2) {
            if pair[1].t <= pair[0].t {
                r.push(
                    ViolationCode::NonMonotonicTrack,
                    format!("entity {} at {} after {}", track.entity_id, pair[1].t, pair[0].t),
                );
            }
        }
        for s in &track.samples {
            if !s.pose.position.is_finite() {
                r.push(ViolationCode::NonFiniteValue, format!("entity {} sample at {}", track.entity_id, s.t));
            }
            if !s.pose.orientation.is_unit() {
                r.push(ViolationCode::BadQuaternion, format!("entity {} sample at {}", track.entity_id, s.t));
            }
        }
    }
    if !pod.tracks.iter().any(|t| t.role == EntityRole::Head && !t.samples.is_empty()) {
        r.push(ViolationCode::MissingHeadTrack, "no head track with samples");
    }

    let starts: Vec<_> = pod.annotations_of(AnnotationKind::Start).collect();
    let ends: Vec<_> = pod.annotations_of(AnnotationKind::End).collect();
    match starts.len() {
        0 => r.push(ViolationCode::MissingStart, "no Start annotation"),
        1 => {}
        n => r.push(ViolationCode::DuplicateStart, format!("{n} Start annotations")),
    }
    match ends.len() {
        0 => r.push(ViolationCode::MissingEnd, "no End annotation"),
        1 => {}
        n => r.push(ViolationCode::DuplicateEnd, format!("{n} End annotations")),
    }
    if let (Some(s), Some(e)) = (starts.first(), ends.first()) {
        if s.at >= e.at {
            r.push(ViolationCode::StartAfterEnd, format!("Start at {} not before End at {}", s.at, e.at));
        }
    }

    let span = pod.sample_span();
    let mut annotation_ids = HashSet::new();
    for a in &pod.annotations {
        if !annotation_ids.insert(a.id) {
            r.push(ViolationCode::DuplicateAnnotationId, format!("annotation {}", a.id));
        }
        if let Some((first, last)) = span {
            if a.at < first || a.at > last {
                r.push(
                    ViolationCode::AnnotationOutOfRange,
                    format!("annotation {} at {} outside [{first}, {last}]", a.id, a.at),
                );
            }
        }
        if let Some(e) = a.entity_ref {
            if !entity_ids.contains(&e) {
                r.push(ViolationCode::DanglingEntityRef, format!("annotation {} refers to entity {e}", a.id));
            }
        }
        if !a.position.is_finite() {
            r.push(ViolationCode::NonFiniteValue, format!("annotation {} position", a.id));
        }
    }

    for (i, seg) in pod.transcript.iter().enumerate() {
        if seg.start > seg.end {
            r.push(ViolationCode::OverlappingTranscript, format!("segment {i} ends before it starts"));
        }
        if i > 0 && seg.start < pod.transcript[i - 1].end {
            r.push(ViolationCode::OverlappingTranscript, format!("segment {i} overlaps its predecessor"));
        }
    }

    let vertex_count = pod.mesh.vertices.len() as u64;
    for (i, tri) in pod.mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&v| v as u64 >= vertex_count) {
            r.push(ViolationCode::BadMeshIndex, format!("triangle {i} {tri:?} with {vertex_count} vertices"));
        }
    }
    if pod.mesh.vertices.iter().any(|v| !v.is_finite()) {
        r.push(ViolationCode::NonFiniteValue, "mesh vertex");
    }

    let mut zone_ids = HashSet::new();
    for z in &pod.zones {
        if !zone_ids.insert(z.id.as_str()) || !(z.min_x < z.max_x) || !(z.min_z < z.max_z) {
            r.push(ViolationCode::InvalidZone, format!("zone {:?}", z.id));
        }
    }

    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{UnitQuat, Vec3, Zone};
    use crate::pod::fixtures::minimal_pod;
    use crate::pod::{Annotation, TranscriptSegment};
    use crate::time::Timestamp;

    fn only(pod: &MemoryPod, code: ViolationCode) {
        let report = validate(pod);
        assert_eq!(report.codes(), BTreeSet::from([code]), "{report}");
    }

    #[test]
    fn minimal_pod_is_valid() {
        assert!(validate(&minimal_pod()).is_empty());
    }

    #[test]
    fn missing_end() {
        let mut pod = minimal_pod();
        pod.annotations.retain(|a| a.kind != AnnotationKind::End);
        only(&pod, ViolationCode::MissingEnd);
    }

    #[test]
    fn missing_start() {
        let mut pod = minimal_pod();
        pod.annotations.retain(|a| a.kind != AnnotationKind::Start);
        only(&pod, ViolationCode::MissingStart);
    }

    #[test]
    fn repeated_sample_time() {
        let mut pod = minimal_pod();
        pod.tracks[0].samples[5].t = pod.tracks[0].samples[4].t;
        only(&pod, ViolationCode::NonMonotonicTrack);
    }

    #[test]
    fn start_after_end() {
        let mut pod = minimal_pod();
        pod.annotations[0].at = Timestamp(10_000_000);
        pod.annotations[1].at = Timestamp(5_000_000);
        only(&pod, ViolationCode::StartAfterEnd);
    }

    #[test]
    fn annotation_outside_samples() {
        let mut pod = minimal_pod();
        pod.annotations.push(Annotation {
            id: 9,
            kind: AnnotationKind::Use,
            label: "late".into(),
            at: Timestamp(11_000_000),
            position: Vec3::ZERO,
            entity_ref: None,
        });
        only(&pod, ViolationCode::AnnotationOutOfRange);
    }

    #[test]
    fn dangling_ref() {
        let mut pod = minimal_pod();
        pod.annotations[1].entity_ref = Some(42);
        only(&pod, ViolationCode::DanglingEntityRef);
    }

    #[test]
    fn bad_quaternion() {
        let mut pod = minimal_pod();
        pod.tracks[0].samples[2].pose.orientation = UnitQuat::from_wxyz_unchecked(0.0, 0.0, 0.0, 0.0);
        only(&pod, ViolationCode::BadQuaternion);
    }

    #[test]
    fn bad_mesh_index() {
        let mut pod = minimal_pod();
        pod.mesh.vertices = vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        pod.mesh.triangles = vec![[0, 1, 2], [0, 1, 3]];
        only(&pod, ViolationCode::BadMeshIndex);
    }

    #[test]
    fn overlapping_transcript() {
        let mut pod = minimal_pod();
        let seg = |a: u64, b: u64| TranscriptSegment {
            start: Timestamp(a),
            end: Timestamp(b),
            speaker: "s".into(),
            text: "t".into(),
        };
        pod.transcript = vec![seg(0, 5), seg(5, 8)];
        assert!(validate(&pod).is_empty());
        pod.transcript = vec![seg(0, 5), seg(4, 8)];
        only(&pod, ViolationCode::OverlappingTranscript);
    }

    #[test]
    fn duplicate_zone() {
        let mut pod = minimal_pod();
        pod.zones.push(Zone::new("A", "again", 20.0, 21.0, 0.0, 1.0).unwrap());
        only(&pod, ViolationCode::InvalidZone);
    }

    #[test]
    fn missing_head() {
        let mut pod = minimal_pod();
        pod.tracks[0].role = EntityRole::Object;
        only(&pod, ViolationCode::MissingHeadTrack);
    }
}
