//! JSON shapes shared by the HTTP API, the replay stream and the CLI.

use memorypod::geometry::{AnchorFrame, MiniaturePlacement, Pose, UnitQuat, Vec3};
use memorypod::pod::{AnnotationKind, EntityRole};
use memorypod::replay::{Direction, FrameState, ReplayMode};
use memorypod::{MemoryPod, Timestamp};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeView {
    pub t_us: Timestamp,
    pub annotation_id: u32,
    pub kind: AnnotationKind,
    pub label: String,
}

/// One entry per annotation, ordered by time then id.
pub fn keyframe_views(pod: &MemoryPod) -> Vec<KeyframeView> {
    let mut v: Vec<KeyframeView> = pod
        .annotations
        .iter()
        .map(|a| KeyframeView { t_us: a.at, annotation_id: a.id, kind: a.kind, label: a.label.clone() })
        .collect();
    v.sort_by_key(|k| (k.t_us, k.annotation_id));
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityView {
    pub id: u16,
    pub role: EntityRole,
    pub label: String,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodInfo {
    pub pod_id: String,
    /// Id written into the file by the recorder; the store assigns its own.
    pub recorded_pod_id: String,
    pub title: String,
    pub created_at: String,
    pub duration_us: Timestamp,
    pub process_duration_us: Timestamp,
    pub annotation_count: usize,
    pub transcript_segments: usize,
    pub entities: Vec<EntityView>,
    pub zones: Vec<String>,
    pub anchor: AnchorFrame,
    pub synthetic_end: bool,
}

pub fn pod_info(pod_id: &str, pod: &MemoryPod) -> PodInfo {
    PodInfo {
        pod_id: pod_id.to_owned(),
        recorded_pod_id: pod.pod_id.clone(),
        title: pod.title.clone(),
        created_at: pod.created_at.clone(),
        duration_us: pod.duration(),
        process_duration_us: pod.process_duration().unwrap_or_default(),
        annotation_count: pod.annotations.len(),
        transcript_segments: pod.transcript.len(),
        entities: pod
            .tracks
            .iter()
            .map(|t| EntityView { id: t.entity_id, role: t.role, label: t.label.clone(), samples: t.samples.len() })
            .collect(),
        zones: pod.zones.iter().map(|z| z.id.clone()).collect(),
        anchor: pod.anchor,
        synthetic_end: pod.synthetic_end,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshView {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// The pod's mesh, placed through `mode` when given, else anchor-relative.
pub fn mesh_view(pod: &MemoryPod, mode: Option<&ReplayMode>) -> MeshView {
    let vertices = match mode {
        Some(m) => pod.mesh.vertices.iter().map(|v| m.place_point(*v)).collect(),
        None => pod.mesh.vertices.clone(),
    };
    MeshView { vertices, triangles: pod.mesh.triangles.clone() }
}

/// Replay mode given as flat query parameters or CLI flags.
///
/// `mode` is `real` (default) or `mini`. Poses are written
/// `x,y,z` or `x,y,z,qw,qx,qy,qz`. A real-scale replay without `anchor`
/// reuses the anchor pose recorded in the pod, which reproduces the original
/// world coordinates; a miniature without `placement` sits at the origin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: Option<String>,
    pub scale: Option<f64>,
    pub anchor: Option<String>,
    pub placement: Option<String>,
}

pub fn parse_pose(s: &str) -> Result<Pose, String> {
    let nums: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?} in pose {s:?}")))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [x, y, z] => Ok(Pose::from_position(Vec3::new(x, y, z))),
        [x, y, z, w, qx, qy, qz] => {
            let q = UnitQuat::new(w, qx, qy, qz).map_err(|e| e.to_string())?;
            Ok(Pose::new(Vec3::new(x, y, z), q))
        }
        _ => Err(format!("pose {s:?} needs 3 or 7 comma-separated numbers")),
    }
}

impl ModeSpec {
    pub fn resolve(&self, pod: &MemoryPod) -> Result<ReplayMode, String> {
        match self.mode.as_deref().unwrap_or("real") {
            "real" => {
                if self.scale.is_some_and(|s| s != 1.0) {
                    return Err("scale only applies to mode=mini".into());
                }
                let anchor = match &self.anchor {
                    Some(s) => AnchorFrame::new(parse_pose(s)?),
                    None => pod.anchor,
                };
                Ok(ReplayMode::real(anchor))
            }
            "mini" => {
                let placement = match &self.placement {
                    Some(s) => parse_pose(s)?,
                    None => Pose::IDENTITY,
                };
                let scale = self.scale.ok_or("mode=mini needs a scale")?;
                Ok(ReplayMode::Miniature(MiniaturePlacement::new(placement, scale).map_err(|e| e.to_string())?))
            }
            other => Err(format!("unknown mode {other:?}, expected real or mini")),
        }
    }
}

/// Client-to-server replay stream messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Control {
    Play,
    Pause,
    Seek { t_us: Timestamp },
    Rate { rate: f64 },
    Keyframe { direction: Direction },
    Mode(ReplayMode),
}

/// Server-to-client replay stream messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Frame(FrameState),
    Error { code: String, detail: String },
}
