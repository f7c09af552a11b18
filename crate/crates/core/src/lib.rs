//! Recording, storage and replay of anchor-relative spatio-temporal sessions.
//!
//! A session is captured as a stream of [`recorder::CaptureEvent`]s, folded
//! into an immutable [`pod::MemoryPod`], stored in the MPOD file format
//! ([`pod::codec`]) and replayed at real scale or in miniature through
//! [`replay::ReplaySession`]. [`narrative`] turns a pod into a structured
//! summary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod narrative;
pub mod pod;
pub mod recorder;
pub mod replay;
pub mod time;

pub use geometry::{AnchorFrame, MiniaturePlacement, Pose, UnitQuat, Vec3, Zone};
pub use pod::{AnnotationKind, EntityRole, MemoryPod};
pub use time::Timestamp;
