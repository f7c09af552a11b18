//! Synthetic capture sessions.
//!
//! A scenario is a floor plan (zones), a cast of tracked entities and an
//! ordered list of annotated steps, each tied to a zone and a time offset.
//! [`simulate_scenario`] produces the world-frame event stream a headset
//! would have emitted while a person walked that procedure.
//!
//! Motion model, in the anchor frame:
//! * the walking path is piecewise linear through the step zones' centers,
//!   reaching each center at its step's time; it holds still before the
//!   first and after the last step;
//! * the head rides at 1.7 m, yawing `0.5·sin(2πt/15 s)`; hands sit 0.25 m
//!   left/right, 0.5 m below and 0.3 m ahead of the head in its yaw frame;
//!   objects ride 0.1 m ahead of the right hand;
//! * every sampled position gets independent per-axis jitter, uniform in
//!   ±1 cm (≤ 1.8 cm total), and annotations sit at 1.0 m height within
//!   `min(1 cm, width/4)` of their zone's center.
//!
//! Samples are taken at `k / sample_hz` plus every step time, and stop at the
//! End step. Each step also yields a transcript segment `"<label> at zone
//! <zone>"` lasting up to 2 s (never overlapping the next step), emitted just
//! before the step's annotation because the End annotation closes the
//! session. The mesh is a two-triangle floor spanning the zones' bounding
//! rectangle.
//!
//! Randomness comes from [`Lcg`], a 64-bit linear congruential generator:
//!
//! ```text
//! state ← state · 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! uniform = (state >> 11) · 2^-53                              in [0, 1)
//! ```
//!
//! seeded with `state = seed`. When the scenario names no anchor pose, the
//! first three draws place it: `x = 6u₀ − 3`, `z = 6u₁ − 3`, yaw `= 2π u₂ − π`.
//! Jitter draws then follow in event order, x before y before z.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::capture_log::{CaptureHeader, CaptureLog};
use super::{CaptureEvent, Coord};
use crate::geometry::{from_anchor_frame, AnchorFrame, Pose, UnitQuat, Vec3, Zone};
use crate::pod::{AnnotationKind, EntityRole};
use crate::time::Timestamp;

const HEAD_HEIGHT: f64 = 1.7;
const ANNOTATION_HEIGHT: f64 = 1.0;
const JITTER: f64 = 0.01;
const TRANSCRIPT_SPAN_US: u64 = 2_000_000;

/// Seeded 64-bit LCG; see the module docs for the exact recurrence.
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-amplitude, amplitude)`.
    pub fn jitter(&mut self, amplitude: f64) -> f64 {
        amplitude * (2.0 * self.next_f64() - 1.0)
    }

    fn jitter3(&mut self, amplitude: f64) -> Vec3 {
        let x = self.jitter(amplitude);
        let y = self.jitter(amplitude);
        let z = self.jitter(amplitude);
        Vec3::new(x, y, z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntity {
    pub role: EntityRole,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub kind: AnnotationKind,
    pub label: String,
    pub zone: String,
    pub offset_s: f64,
}

fn default_sample_hz() -> f64 {
    30.0
}

fn default_title() -> String {
    "Simulated session".into()
}

fn default_created_at() -> String {
    "1970-01-01T00:00:00Z".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub entities: Vec<ScenarioEntity>,
    pub steps: Vec<ScenarioStep>,
    pub zones: Vec<Zone>,
    #[serde(default = "default_sample_hz")]
    pub sample_hz: f64,
    #[serde(default = "default_title")]
    pub title: String,
    #[serde(default = "default_created_at")]
    pub created_at: String,
    /// World pose of the anchor; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Pose>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidScenario(msg.into())
}

impl ScenarioConfig {
    /// The five-step hard-drive replacement walk-through: fetch a drive from
    /// storage, swap it into the rack, dispose of the old one.
    pub fn hard_drive_replacement(seed: u64) -> Self {
        let zone = |id: &str, name: &str, x0: f64, x1: f64, z0: f64, z1: f64| {
            Zone::new(id, name, x0, x1, z0, z1).expect("static zone")
        };
        let step = |kind, label: &str, zone: &str, offset_s| ScenarioStep {
            kind,
            label: label.into(),
            zone: zone.into(),
            offset_s,
        };
        ScenarioConfig {
            seed,
            duration_s: 90.0,
            entities: vec![
                ScenarioEntity { role: EntityRole::Head, label: "technician".into() },
                ScenarioEntity { role: EntityRole::LeftHand, label: "left hand".into() },
                ScenarioEntity { role: EntityRole::RightHand, label: "right hand".into() },
            ],
            steps: vec![
                step(AnnotationKind::Start, "begin maintenance", "E", 0.0),
                step(AnnotationKind::Acquire, "hard drive", "S", 15.0),
                step(AnnotationKind::Use, "drive bay", "R", 40.0),
                step(AnnotationKind::Deposit, "old hard drive", "B", 65.0),
                step(AnnotationKind::End, "maintenance complete", "E", 85.0),
            ],
            zones: vec![
                zone("E", "entrance", 0.0, 2.0, 0.0, 2.0),
                zone("S", "storage shelf", 2.0, 4.0, 0.0, 2.0),
                zone("R", "server rack", 2.0, 4.0, 2.0, 4.0),
                zone("B", "disposal bin", 0.0, 2.0, 2.0, 4.0),
            ],
            sample_hz: 30.0,
            title: "Hard drive replacement".into(),
            created_at: default_created_at(),
            anchor: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s must be positive"));
        }
        if !(self.sample_hz > 0.0 && self.sample_hz.is_finite()) {
            return Err(invalid("sample_hz must be positive"));
        }
        if self.entities.len() >= usize::from(u16::MAX) {
            return Err(invalid("too many entities"));
        }
        if !self.entities.iter().any(|e| e.role == EntityRole::Head) {
            return Err(invalid("a Head entity is required"));
        }
        let mut ids = std::collections::HashSet::new();
        if !self.zones.iter().all(|z| ids.insert(z.id.as_str())) {
            return Err(invalid("duplicate zone id"));
        }
        let (first, last) = match (self.steps.first(), self.steps.last()) {
            (Some(f), Some(l)) if self.steps.len() >= 2 => (f, l),
            _ => return Err(invalid("need at least a Start and an End step")),
        };
        if first.kind != AnnotationKind::Start || last.kind != AnnotationKind::End {
            return Err(invalid("first step must be Start and last step End"));
        }
        let inner = &self.steps[1..self.steps.len() - 1];
        if inner.iter().any(|s| matches!(s.kind, AnnotationKind::Start | AnnotationKind::End)) {
            return Err(invalid("Start and End may only appear once"));
        }
        for s in &self.steps {
            if !ids.contains(s.zone.as_str()) {
                return Err(invalid(format!("step {:?} names unknown zone {:?}", s.label, s.zone)));
            }
            if !(s.offset_s >= 0.0 && s.offset_s <= self.duration_s) {
                return Err(invalid(format!("step {:?} offset outside [0, duration]", s.label)));
            }
        }
        let times: Vec<Timestamp> = self.steps.iter().map(|s| Timestamp::from_secs_f64(s.offset_s)).collect();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("step offsets must strictly increase"));
        }
        Ok(())
    }

    fn zone(&self, id: &str) -> &Zone {
        self.zones.iter().find(|z| z.id == id).expect("validated zone id")
    }

    /// Capture header carrying this scenario's metadata and floor plan.
    pub fn capture_header(&self) -> CaptureHeader {
        CaptureHeader::new(self.title.clone(), self.created_at.clone(), self.zones.clone())
    }
}

/// Generates the world-frame capture stream for a scenario. Deterministic in
/// the configuration, seed included.
pub fn simulate_scenario(cfg: &ScenarioConfig) -> Result<Vec<CaptureEvent>, ScenarioError> {
    cfg.validate()?;
    let mut rng = Lcg::new(cfg.seed);
    let anchor = AnchorFrame::new(cfg.anchor.unwrap_or_else(|| {
        let x = 6.0 * rng.next_f64() - 3.0;
        let z = 6.0 * rng.next_f64() - 3.0;
        let yaw = 2.0 * PI * rng.next_f64() - PI;
        Pose::new(Vec3::new(x, 0.0, z), UnitQuat::from_yaw(yaw))
    }));
    let world = |rel: Pose| from_anchor_frame(&anchor, &rel);

    let step_times: Vec<Timestamp> = cfg.steps.iter().map(|s| Timestamp::from_secs_f64(s.offset_s)).collect();
    let waypoints: Vec<(Timestamp, Vec3)> =
        cfg.steps.iter().zip(&step_times).map(|(s, &t)| (t, cfg.zone(&s.zone).center())).collect();
    let end = *step_times.last().unwrap();

    let mut times: Vec<Timestamp> = (0u64..)
        .map(|k| Timestamp((k as f64 * 1e6 / cfg.sample_hz).round() as u64))
        .take_while(|&t| t <= end)
        .chain(step_times.iter().copied())
        .collect();
    times.sort_unstable();
    times.dedup();

    let mut events = vec![CaptureEvent::AnchorDetected { coord: Coord::World, pose: anchor.pose }];
    let head_id = cfg.entities.iter().position(|e| e.role == EntityRole::Head).unwrap() as u16;
    let hand_id = cfg.entities.iter().position(|e| e.role == EntityRole::RightHand).map(|i| i as u16);
    for (id, e) in cfg.entities.iter().enumerate() {
        events.push(CaptureEvent::DefineEntity { entity: id as u16, role: e.role, label: e.label.clone() });
    }
    events.push(floor_mesh(cfg, &world));

    let speaker = cfg.entities[head_id as usize].label.clone();
    let mut next_step = 0;
    for &t in &times {
        let ground = path_position(&waypoints, t);
        let yaw = UnitQuat::from_yaw(0.5 * (2.0 * PI * t.as_secs_f64() / 15.0).sin());
        let head = Vec3::new(ground.x, HEAD_HEIGHT, ground.z);
        let hand = |side: f64| head + yaw.rotate(Vec3::new(0.25 * side, -0.5, -0.3));
        for (id, e) in cfg.entities.iter().enumerate() {
            let base = match e.role {
                EntityRole::Head => head,
                EntityRole::LeftHand => hand(-1.0),
                EntityRole::RightHand => hand(1.0),
                EntityRole::Object => hand(1.0) + yaw.rotate(Vec3::new(0.0, 0.0, -0.1)),
            };
            let rel = Pose::new(base + rng.jitter3(JITTER), yaw);
            events.push(CaptureEvent::SamplePose { coord: Coord::World, entity: id as u16, t_us: t, pose: world(rel) });
        }

        while next_step < cfg.steps.len() && step_times[next_step] == t {
            let step = &cfg.steps[next_step];
            let zone = cfg.zone(&step.zone);
            let c = zone.center();
            let ax = JITTER.min((zone.max_x - zone.min_x) / 4.0);
            let az = JITTER.min((zone.max_z - zone.min_z) / 4.0);
            let rel = Vec3::new(c.x + rng.jitter(ax), ANNOTATION_HEIGHT, c.z + rng.jitter(az));
            let entity = match step.kind {
                AnnotationKind::Start | AnnotationKind::End => Some(head_id),
                _ => hand_id.or(Some(head_id)),
            };
            let seg_end = step_times
                .get(next_step + 1)
                .map_or(t, |&next| Timestamp((t.as_micros() + TRANSCRIPT_SPAN_US).min(next.as_micros())));
            events.push(CaptureEvent::Transcript {
                start_us: t,
                end_us: seg_end,
                speaker: speaker.clone(),
                text: format!("{} at zone {}", step.label, step.zone),
            });
            events.push(CaptureEvent::Annotate {
                coord: Coord::World,
                kind: step.kind,
                label: step.label.clone(),
                t_us: t,
                p: world(Pose::from_position(rel)).position,
                entity,
                zone: Some(step.zone.clone()),
            });
            next_step += 1;
        }
    }
    events.push(CaptureEvent::SessionEnd { t_us: end });
    Ok(events)
}

/// Simulated stream wrapped as a capture log with the scenario's header.
pub fn simulate_capture_log(cfg: &ScenarioConfig) -> Result<CaptureLog, ScenarioError> {
    Ok(CaptureLog { header: cfg.capture_header(), events: simulate_scenario(cfg)? })
}

fn path_position(waypoints: &[(Timestamp, Vec3)], t: Timestamp) -> Vec3 {
    let after = waypoints.partition_point(|(wt, _)| *wt <= t);
    match (after.checked_sub(1).map(|i| waypoints[i]), waypoints.get(after)) {
        (None, Some(&(_, p))) | (Some((_, p)), None) => p,
        (Some((t0, p0)), Some(&(t1, p1))) => {
            let u = (t - t0).as_micros() as f64 / (t1 - t0).as_micros() as f64;
            p0.lerp(p1, u)
        }
        (None, None) => Vec3::ZERO,
    }
}

fn floor_mesh(cfg: &ScenarioConfig, world: &impl Fn(Pose) -> Pose) -> CaptureEvent {
    let min_x = cfg.zones.iter().map(|z| z.min_x).fold(f64::INFINITY, f64::min);
    let max_x = cfg.zones.iter().map(|z| z.max_x).fold(f64::NEG_INFINITY, f64::max);
    let min_z = cfg.zones.iter().map(|z| z.min_z).fold(f64::INFINITY, f64::min);
    let max_z = cfg.zones.iter().map(|z| z.max_z).fold(f64::NEG_INFINITY, f64::max);
    let (vertices, triangles) = if cfg.zones.is_empty() {
        (vec![], vec![])
    } else {
        let corners = [(min_x, min_z), (max_x, min_z), (max_x, max_z), (min_x, max_z)];
        let vertices = corners
            .iter()
            .map(|&(x, z)| world(Pose::from_position(Vec3::new(x, 0.0, z))).position)
            .collect();
        (vertices, vec![[0, 1, 2], [0, 2, 3]])
    };
    CaptureEvent::MeshSnapshot { coord: Coord::World, t_us: Timestamp::ZERO, vertices, triangles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::to_anchor_frame;
    use crate::pod::validate;
    use crate::recorder::{record, SessionMeta};

    #[test]
    fn lcg_reference_values() {
        let mut r = Lcg::new(0);
        assert_eq!(r.next_u64(), 1442695040888963407);
        assert_eq!(r.next_u64(), 1442695040888963407u64.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407));
        let mut r = Lcg::new(42);
        for _ in 0..1000 {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = ScenarioConfig::hard_drive_replacement(7);
        let a = serde_json::to_vec(&simulate_scenario(&cfg).unwrap()).unwrap();
        let b = serde_json::to_vec(&simulate_scenario(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = serde_json::to_vec(&simulate_scenario(&ScenarioConfig::hard_drive_replacement(8)).unwrap()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn one_annotation_per_step_inside_its_zone() {
        let cfg = ScenarioConfig::hard_drive_replacement(3);
        let events = simulate_scenario(&cfg).unwrap();
        let anchor = match &events[0] {
            CaptureEvent::AnchorDetected { pose, .. } => AnchorFrame::new(*pose),
            other => panic!("first event {other:?}"),
        };
        let annotations: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                CaptureEvent::Annotate { kind, p, zone, .. } => Some((*kind, *p, zone.clone().unwrap())),
                _ => None,
            })
            .collect();
        assert_eq!(annotations.len(), 5);
        let kinds: Vec<_> = annotations.iter().map(|a| a.0).collect();
        assert_eq!(kinds, cfg.steps.iter().map(|s| s.kind).collect::<Vec<_>>());
        for (_, p, zone) in annotations {
            let rel = to_anchor_frame(&anchor, &Pose::from_position(p)).position;
            assert!(cfg.zone(&zone).contains(rel), "{rel:?} not in {zone}");
        }
    }

    #[test]
    fn jitter_is_bounded_and_path_hits_zone_centers() {
        let mut cfg = ScenarioConfig::hard_drive_replacement(11);
        cfg.anchor = Some(Pose::IDENTITY);
        let events = simulate_scenario(&cfg).unwrap();
        for (step, t) in cfg.steps.iter().map(|s| (s, Timestamp::from_secs_f64(s.offset_s))) {
            let head = events
                .iter()
                .find_map(|e| match e {
                    CaptureEvent::SamplePose { entity: 0, t_us, pose, .. } if *t_us == t => Some(pose.position),
                    _ => None,
                })
                .unwrap();
            let c = cfg.zone(&step.zone).center();
            let ideal = Vec3::new(c.x, HEAD_HEIGHT, c.z);
            assert!(head.distance(ideal) <= 0.02, "{} m off", head.distance(ideal));
        }
    }

    #[test]
    fn simulated_session_records_a_valid_pod() {
        let cfg = ScenarioConfig::hard_drive_replacement(1);
        let events = simulate_scenario(&cfg).unwrap();
        let meta = SessionMeta {
            pod_id: "sim".into(),
            title: cfg.title.clone(),
            created_at: cfg.created_at.clone(),
            zones: cfg.zones.clone(),
        };
        let pod = record(meta, &events).unwrap();
        assert!(validate(&pod).is_empty());
        assert_eq!(pod.annotations.len(), 5);
        assert_eq!(pod.transcript.len(), 5);
        assert_eq!(pod.mesh.triangles.len(), 2);
        assert!(!pod.synthetic_end);
        assert_eq!(pod.process_duration(), Some(Timestamp(85_000_000)));
    }

    #[test]
    fn invalid_configs() {
        let base = ScenarioConfig::hard_drive_replacement(0);
        let mut c = base.clone();
        c.steps.swap(1, 2);
        assert!(simulate_scenario(&c).is_err());
        let mut c = base.clone();
        c.steps[0].kind = AnnotationKind::Use;
        assert!(simulate_scenario(&c).is_err());
        let mut c = base.clone();
        c.steps[2].zone = "nowhere".into();
        assert!(simulate_scenario(&c).is_err());
        let mut c = base.clone();
        c.entities.retain(|e| e.role != EntityRole::Head);
        assert!(simulate_scenario(&c).is_err());
        let mut c = base.clone();
        c.sample_hz = 0.0;
        assert!(simulate_scenario(&c).is_err());
        let mut c = base;
        c.steps[4].offset_s = 120.0;
        assert!(simulate_scenario(&c).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let json = r#"{
            "seed": 5, "duration_s": 10,
            "entities": [{"role": "Head", "label": "h"}],
            "steps": [
                {"kind": "Start", "label": "go", "zone": "A", "offset_s": 0},
                {"kind": "End", "label": "stop", "zone": "A", "offset_s": 10}
            ],
            "zones": [{"id": "A", "name": "a", "min_x": 0, "max_x": 1, "min_z": 0, "max_z": 1}]
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.sample_hz, 30.0);
        let events = simulate_scenario(&cfg).unwrap();
        let samples = events.iter().filter(|e| matches!(e, CaptureEvent::SamplePose { .. })).count();
        assert_eq!(samples, 301);
    }
}
