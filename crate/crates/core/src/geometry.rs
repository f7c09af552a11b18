//! Rigid-body geometry shared by recording and replay.
//!
//! Conventions: right-handed coordinates, Y up, forward is −Z, distances in
//! meters, angles in radians. Quaternions are Hamilton products stored as
//! `(w, x, y, z)`; `q` and `−q` describe the same rotation.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Timestamp;

/// Tolerance on `|q| − 1` for a quaternion to count as a rotation.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Below `1 − this`, slerp falls back to normalized linear interpolation.
const SLERP_LINEAR_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("miniature scale must lie in (0, 1], got {0}")]
    InvalidScale(f64),
    #[error("zone {id:?} is empty or inverted")]
    InvalidZone { id: String },
    #[error("field of view needs 0 < half_angle < pi/2 and depth > 0")]
    InvalidFov,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Vec3, u: f64) -> Vec3 {
        self + (o - self) * u
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rounds every component through `f32`, the precision pods are stored at.
    pub fn quantized(self) -> Vec3 {
        Vec3::new(self.x as f32 as f64, self.y as f32 as f64, self.z as f32 as f64)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Serialize for Vec3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        let v = Vec3::from(a);
        if !v.is_finite() {
            return Err(serde::de::Error::custom(GeometryError::NonFinite));
        }
        Ok(v)
    }
}

/// Rotation quaternion `(w, x, y, z)`.
///
/// Constructors normalize. [`UnitQuat::from_wxyz_unchecked`] exists for
/// decoders that must preserve stored bits and report bad values later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        UnitQuat::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeometryError::DegenerateQuaternion);
        }
        Ok(UnitQuat { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    pub const fn from_wxyz_unchecked(w: f64, x: f64, y: f64, z: f64) -> Self {
        UnitQuat { w, x, y, z }
    }

    /// Rotation by `angle` about `axis`; a zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-12 {
            return UnitQuat::IDENTITY;
        }
        let a = axis * (1.0 / n);
        let (s, c) = (angle * 0.5).sin_cos();
        UnitQuat { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    /// Rotation about the +Y (up) axis.
    pub fn from_yaw(angle: f64) -> Self {
        UnitQuat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), angle)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(self) -> bool {
        let n = self.norm();
        n.is_finite() && (n - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Re-normalizes; degenerate input becomes the identity.
    pub fn normalized(self) -> UnitQuat {
        UnitQuat::new(self.w, self.x, self.y, self.z).unwrap_or(UnitQuat::IDENTITY)
    }

    pub fn conjugate(self) -> UnitQuat {
        UnitQuat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn negated(self) -> UnitQuat {
        UnitQuat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Equality of the represented rotations, component-wise up to sign.
    pub fn approx_same_rotation(self, o: UnitQuat, tol: f64) -> bool {
        let diff = |s: f64| {
            (self.w - s * o.w)
                .abs()
                .max((self.x - s * o.x).abs())
                .max((self.y - s * o.y).abs())
                .max((self.z - s * o.z).abs())
        };
        diff(1.0).min(diff(-1.0)) <= tol
    }

    pub fn quantized(self) -> UnitQuat {
        let q = |v: f64| v as f32 as f64;
        UnitQuat { w: q(self.w), x: q(self.x), y: q(self.y), z: q(self.z) }
    }
}

impl Serialize for UnitQuat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

/// Hamilton product `self ⊗ rhs`.
impl Mul for UnitQuat {
    type Output = UnitQuat;

    fn mul(self, b: UnitQuat) -> UnitQuat {
        let a = self;
        UnitQuat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

/// Values already of unit length are kept bit-for-bit; anything else is
/// normalized.
impl<'de> Deserialize<'de> for UnitQuat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        let raw = UnitQuat::from_wxyz_unchecked(w, x, y, z);
        if raw.to_array().iter().all(|c| c.is_finite()) && raw.is_unit() {
            return Ok(raw);
        }
        UnitQuat::new(w, x, y, z).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    #[serde(rename = "p")]
    pub position: Vec3,
    #[serde(rename = "q")]
    pub orientation: UnitQuat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { position: Vec3::ZERO, orientation: UnitQuat::IDENTITY };

    pub const fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Pose { position, orientation }
    }

    pub fn from_position(position: Vec3) -> Self {
        Pose { position, orientation: UnitQuat::IDENTITY }
    }

    pub fn quantized(self) -> Pose {
        Pose { position: self.position.quantized(), orientation: self.orientation.quantized() }
    }
}

/// The calibration marker's pose in the capturing device's world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnchorFrame {
    pub pose: Pose,
}

impl AnchorFrame {
    pub const IDENTITY: AnchorFrame = AnchorFrame { pose: Pose::IDENTITY };

    pub const fn new(pose: Pose) -> Self {
        AnchorFrame { pose }
    }
}

/// Where a scaled-down copy of a scene is placed, e.g. on a tabletop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlacement")]
pub struct MiniaturePlacement {
    placement: Pose,
    scale: f64,
}

#[derive(Deserialize)]
struct RawPlacement {
    placement: Pose,
    scale: f64,
}

impl TryFrom<RawPlacement> for MiniaturePlacement {
    type Error = GeometryError;
    fn try_from(r: RawPlacement) -> Result<Self, Self::Error> {
        MiniaturePlacement::new(r.placement, r.scale)
    }
}

impl MiniaturePlacement {
    pub fn new(placement: Pose, scale: f64) -> Result<Self, GeometryError> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        Ok(MiniaturePlacement { placement, scale })
    }

    pub fn placement(&self) -> Pose {
        self.placement
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Named axis-aligned rectangle on the anchor frame's ground (XZ) plane.
///
/// Containment is half-open, `[min, max)` on both axes, so adjacent zones
/// never share a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawZone")]
pub struct Zone {
    pub id: String,
    pub name: String,
    pub min_x: f64,
    pub max_x: f64,
    pub min_z: f64,
    pub max_z: f64,
}

#[derive(Deserialize)]
struct RawZone {
    id: String,
    name: String,
    min_x: f64,
    max_x: f64,
    min_z: f64,
    max_z: f64,
}

impl TryFrom<RawZone> for Zone {
    type Error = GeometryError;
    fn try_from(r: RawZone) -> Result<Self, Self::Error> {
        Zone::new(r.id, r.name, r.min_x, r.max_x, r.min_z, r.max_z)
    }
}

impl Zone {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        min_x: f64,
        max_x: f64,
        min_z: f64,
        max_z: f64,
    ) -> Result<Self, GeometryError> {
        let id = id.into();
        // `!(a < b)` also rejects NaN bounds.
        if !(min_x < max_x) || !(min_z < max_z) || !(max_x - min_x).is_finite() || !(max_z - min_z).is_finite() {
            return Err(GeometryError::InvalidZone { id });
        }
        Ok(Zone { id, name: name.into(), min_x, max_x, min_z, max_z })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        point_in_zone(self, p)
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new((self.min_x + self.max_x) * 0.5, 0.0, (self.min_z + self.max_z) * 0.5)
    }
}

/// `[min_x, max_x) × [min_z, max_z)`; height is ignored.
pub fn point_in_zone(zone: &Zone, p: Vec3) -> bool {
    zone.min_x <= p.x && p.x < zone.max_x && zone.min_z <= p.z && p.z < zone.max_z
}

/// First zone containing `p`. With disjoint zones there is at most one.
pub fn zone_of(zones: &[Zone], p: Vec3) -> Option<&Zone> {
    zones.iter().find(|z| z.contains(p))
}

/// Spherical linear interpolation along the shortest arc.
pub fn slerp(q0: UnitQuat, q1: UnitQuat, u: f64) -> UnitQuat {
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
    let q0 = q0.normalized();
    let mut q1 = q1.normalized();
    let mut d = q0.dot(q1);
    if d < 0.0 {
        q1 = q1.negated();
        d = -d;
    }
    let (a, b) = if d > 1.0 - SLERP_LINEAR_THRESHOLD {
        (1.0 - u, u)
    } else {
        let theta = d.min(1.0).acos();
        let s = theta.sin();
        (((1.0 - u) * theta).sin() / s, (u * theta).sin() / s)
    };
    UnitQuat::from_wxyz_unchecked(
        a * q0.w + b * q1.w,
        a * q0.x + b * q1.x,
        a * q0.y + b * q1.y,
        a * q0.z + b * q1.z,
    )
    .normalized()
}

/// Expresses a world-frame pose relative to the anchor.
pub fn to_anchor_frame(anchor: &AnchorFrame, world: &Pose) -> Pose {
    let inv = anchor.pose.orientation.conjugate();
    Pose {
        position: inv.rotate(world.position - anchor.pose.position),
        orientation: (inv * world.orientation).normalized(),
    }
}

/// Places an anchor-relative pose back into a world whose anchor sits at `anchor`.
pub fn from_anchor_frame(anchor: &AnchorFrame, rel: &Pose) -> Pose {
    let q = anchor.pose.orientation;
    Pose {
        position: q.rotate(rel.position) + anchor.pose.position,
        orientation: (q * rel.orientation).normalized(),
    }
}

/// Uniformly scales an anchor-relative pose about the anchor origin, then
/// places it rigidly. Orientation is not scaled.
pub fn apply_miniature(m: &MiniaturePlacement, rel: &Pose) -> Pose {
    let scaled = Pose { position: rel.position * m.scale, orientation: rel.orientation };
    from_anchor_frame(&AnchorFrame::new(m.placement), &scaled)
}

/// Linear position / slerp orientation blend between two timed poses, with
/// the interpolation parameter clamped to `[0, 1]`.
pub fn pose_interpolate(a: (Timestamp, &Pose), b: (Timestamp, &Pose), t: Timestamp) -> Pose {
    let (ta, pa) = a;
    let (tb, pb) = b;
    if tb <= ta || t <= ta {
        return *pa;
    }
    if t >= tb {
        return *pb;
    }
    let u = (t.as_micros() - ta.as_micros()) as f64 / (tb.as_micros() - ta.as_micros()) as f64;
    Pose {
        position: pa.position.lerp(pb.position, u),
        orientation: slerp(pa.orientation, pb.orientation, u),
    }
}

/// View-triangle parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovConfig {
    pub half_angle: f64,
    pub depth: f64,
}

impl Default for FovConfig {
    fn default() -> Self {
        FovConfig { half_angle: 30f64.to_radians(), depth: 1.5 }
    }
}

impl FovConfig {
    pub fn new(half_angle: f64, depth: f64) -> Result<Self, GeometryError> {
        if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) || !(depth > 0.0 && depth.is_finite()) {
            return Err(GeometryError::InvalidFov);
        }
        Ok(FovConfig { half_angle, depth })
    }
}

/// Ground-level view triangle `[apex, left, right]` for a head pose.
///
/// The base vertices lie `depth` along the head's forward (−Z) axis turned by
/// `±half_angle` about the head's local up axis.
pub fn fov_footprint(head: &Pose, half_angle: f64, depth: f64) -> [Vec3; 3] {
    let forward = Vec3::new(0.0, 0.0, -1.0);
    let q = head.orientation;
    let left = (q * UnitQuat::from_yaw(half_angle)).rotate(forward);
    let right = (q * UnitQuat::from_yaw(-half_angle)).rotate(forward);
    [head.position, head.position + left * depth, head.position + right * depth]
}
