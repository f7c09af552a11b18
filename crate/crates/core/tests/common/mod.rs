#![allow(dead_code)]

use memorypod::geometry::{AnchorFrame, Pose, UnitQuat, Vec3, Zone};
use memorypod::pod::{Annotation, AnnotationKind, EntityRole, EntityTrack, EnvironmentMesh, MemoryPod, TrackSample, TranscriptSegment};
use memorypod::Timestamp;
use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn vec3(r: &mut impl Rng, extent: f64) -> Vec3 {
    Vec3::new(r.random_range(-extent..extent), r.random_range(-extent..extent), r.random_range(-extent..extent))
}

pub fn quat(r: &mut impl Rng) -> UnitQuat {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        let n2: f64 = c.iter().map(|v| v * v).sum();
        if n2 > 0.01 && n2 <= 1.0 {
            return UnitQuat::new(c[0], c[1], c[2], c[3]).unwrap();
        }
    }
}

pub fn pose(r: &mut impl Rng, extent: f64) -> Pose {
    Pose::new(vec3(r, extent), quat(r))
}

pub fn to_na(p: &Pose) -> Isometry3<f64> {
    let q = p.orientation;
    Isometry3::from_parts(
        Translation3::new(p.position.x, p.position.y, p.position.z),
        UnitQuaternion::from_quaternion(Quaternion::new(q.w(), q.x(), q.y(), q.z())),
    )
}

pub fn na_vec(v: Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

pub fn pos_err(a: Vec3, b: &Vector3<f64>) -> f64 {
    (na_vec(a) - b).norm()
}

/// Component-wise distance between quaternions, minimised over sign.
pub fn rot_err(a: UnitQuat, b: &UnitQuaternion<f64>) -> f64 {
    let a = [a.w(), a.x(), a.y(), a.z()];
    let b = [b.w, b.i, b.j, b.k];
    let plus: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus: f64 = a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

fn label(r: &mut impl Rng) -> String {
    const WORDS: &[&str] = &["hard drive", "screwdriver", "bay", "Ünïcode ✓", "", "bin", "rack-7", "a\"quote"];
    let n = r.random_range(1..=3);
    (0..n).map(|_| WORDS[r.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// A random pod that passes validation, with geometry already at file
/// precision so it survives an encode/decode round trip unchanged.
pub fn valid_pod(seed: u64) -> MemoryPod {
    let mut r = rng(seed);
    let n_tracks = r.random_range(1..=4);
    let id_base: u16 = r.random_range(0..1000);
    let mut tracks = Vec::new();
    for i in 0..n_tracks {
        let role = if i == 0 {
            EntityRole::Head
        } else {
            [EntityRole::LeftHand, EntityRole::RightHand, EntityRole::Object][r.random_range(0..3)]
        };
        let mut track = EntityTrack::new(id_base + i as u16 * 3, role, label(&mut r));
        let n = if i == 0 { r.random_range(2..60) } else { r.random_range(0..30) };
        let mut t = r.random_range(0..3_000_000u64);
        for _ in 0..n {
            track.samples.push(TrackSample { t: Timestamp(t), pose: pose(&mut r, 5.0) });
            t += r.random_range(1..1_500_000);
        }
        tracks.push(track);
    }
    let first = tracks[0].samples[0].t;
    let last = tracks[0].samples.last().unwrap().t;
    let ids: Vec<u16> = tracks.iter().map(|t| t.entity_id).collect();

    let n_extra = r.random_range(0..8);
    let mut kinds = vec![AnnotationKind::Start, AnnotationKind::End];
    for _ in 0..n_extra {
        kinds.push([AnnotationKind::Acquire, AnnotationKind::Use, AnnotationKind::Deposit][r.random_range(0..3)]);
    }
    let id_start: u32 = r.random_range(0..100);
    let annotations = kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let at = match kind {
                AnnotationKind::Start => first,
                AnnotationKind::End => last,
                _ => Timestamp(r.random_range(first.as_micros()..=last.as_micros())),
            };
            Annotation {
                id: id_start + i as u32 * 2,
                kind,
                label: label(&mut r),
                at,
                position: vec3(&mut r, 4.0),
                entity_ref: if r.random_bool(0.5) { Some(ids[r.random_range(0..ids.len())]) } else { None },
            }
        })
        .collect();

    let mut transcript = Vec::new();
    let mut t = 0u64;
    for _ in 0..r.random_range(0..6) {
        let start = t + r.random_range(0..2_000_000);
        let end = start + r.random_range(0..3_000_000);
        transcript.push(TranscriptSegment { start: Timestamp(start), end: Timestamp(end), speaker: label(&mut r), text: label(&mut r) });
        t = end;
    }

    let n_vertices = r.random_range(0..12u32);
    let vertices = (0..n_vertices).map(|_| vec3(&mut r, 6.0)).collect();
    let triangles = if n_vertices == 0 {
        vec![]
    } else {
        (0..r.random_range(0..10)).map(|_| std::array::from_fn(|_| r.random_range(0..n_vertices))).collect()
    };

    let zones = (0..r.random_range(0..4))
        .map(|i| {
            let x = r.random_range(-4.0..4.0);
            let z = r.random_range(-4.0..4.0);
            Zone::new(format!("Z{i}"), label(&mut r), x, x + r.random_range(0.1..3.0), z, z + r.random_range(0.1..3.0)).unwrap()
        })
        .collect();

    MemoryPod {
        pod_id: format!("pod-{seed}"),
        title: label(&mut r),
        created_at: "2024-05-01T12:00:00Z".into(),
        anchor: AnchorFrame::new(pose(&mut r, 3.0)),
        tracks,
        annotations,
        transcript,
        mesh: EnvironmentMesh { vertices, triangles },
        zones,
        synthetic_end: r.random_bool(0.2),
    }
    .quantized()
}
