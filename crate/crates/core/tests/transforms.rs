mod common;

use common::*;
use memorypod::geometry::{
    apply_miniature, fov_footprint, from_anchor_frame, pose_interpolate, slerp, to_anchor_frame, AnchorFrame, MiniaturePlacement, Pose,
    UnitQuat, Vec3,
};
use memorypod::Timestamp;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn anchor_round_trip_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let anchor = AnchorFrame::new(pose(&mut r, 50.0));
        let world = pose(&mut r, 50.0);

        let rel = to_anchor_frame(&anchor, &world);
        let oracle = to_na(&anchor.pose).inverse() * to_na(&world);
        prop_assert!(pos_err(rel.position, &oracle.translation.vector) < 1e-9);
        prop_assert!(rot_err(rel.orientation, &oracle.rotation) < 1e-9);

        let back = from_anchor_frame(&anchor, &rel);
        prop_assert!(back.position.distance(world.position) < 1e-6);
        prop_assert!(back.orientation.approx_same_rotation(world.orientation, 1e-6));
    }

    #[test]
    fn anchor_change_is_an_isometry(seed in any::<u64>()) {
        let mut r = rng(seed);
        let anchor = AnchorFrame::new(pose(&mut r, 20.0));
        let a = pose(&mut r, 20.0);
        let b = pose(&mut r, 20.0);
        let d = a.position.distance(b.position);
        let d_rel = to_anchor_frame(&anchor, &a).position.distance(to_anchor_frame(&anchor, &b).position);
        prop_assert!((d - d_rel).abs() <= 1e-9 * d.max(1.0));
    }

    #[test]
    fn miniature_is_a_similarity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let scale = r.random_range(1e-3..=1.0);
        let m = MiniaturePlacement::new(pose(&mut r, 3.0), scale).unwrap();
        let a = pose(&mut r, 10.0);
        let b = pose(&mut r, 10.0);

        let ma = apply_miniature(&m, &a);
        let oracle = to_na(&m.placement()) * nalgebra::Point3::from(na_vec(a.position) * scale);
        prop_assert!(pos_err(ma.position, &oracle.coords) < 1e-9);
        let q_oracle = to_na(&m.placement()).rotation * to_na(&a).rotation;
        prop_assert!(rot_err(ma.orientation, &q_oracle) < 1e-9);

        let d = a.position.distance(b.position);
        let dm = ma.position.distance(apply_miniature(&m, &b).position);
        prop_assert!((dm - scale * d).abs() <= 1e-6 * scale * d.max(1e-9));
    }

    #[test]
    fn unit_miniature_equals_real_scale(seed in any::<u64>()) {
        let mut r = rng(seed);
        let placement = pose(&mut r, 5.0);
        let rel = pose(&mut r, 5.0);
        let m = MiniaturePlacement::new(placement, 1.0).unwrap();
        prop_assert_eq!(apply_miniature(&m, &rel), from_anchor_frame(&AnchorFrame::new(placement), &rel));
    }

    #[test]
    fn slerp_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = quat(&mut r);
        let b = quat(&mut r);
        let u = r.random_range(0.0..=1.0);
        let na_a = to_na(&Pose::new(Vec3::ZERO, a)).rotation;
        let mut na_b = to_na(&Pose::new(Vec3::ZERO, b)).rotation;
        if na_a.coords.dot(&na_b.coords) < 0.0 {
            na_b = UnitQuaternion::new_unchecked(-na_b.into_inner());
        }
        let Some(oracle) = na_a.try_slerp(&na_b, u, 1e-9) else { return Ok(()) };
        prop_assert!(rot_err(slerp(a, b, u), &oracle) < 1e-9);
    }

    #[test]
    fn view_triangle_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let head = pose(&mut r, 5.0);
        let half = r.random_range(0.05..1.5);
        let depth = r.random_range(0.1..4.0);
        let [apex, left, right] = fov_footprint(&head, half, depth);
        let iso = to_na(&head);
        let fwd = Vector3::new(0.0, 0.0, -1.0);
        let l = iso * nalgebra::Point3::from(UnitQuaternion::from_axis_angle(&Vector3::y_axis(), half) * fwd * depth);
        let rr = iso * nalgebra::Point3::from(UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -half) * fwd * depth);
        prop_assert_eq!(apex, head.position);
        prop_assert!(pos_err(left, &l.coords) < 1e-9);
        prop_assert!(pos_err(right, &rr.coords) < 1e-9);
    }
}

#[test]
fn quarter_turn_anchor() {
    // anchor 1 m along +X, 2 m along +Z, turned 90 degrees left
    let anchor = AnchorFrame::new(Pose::new(Vec3::new(1.0, 0.0, 2.0), UnitQuat::from_yaw(std::f64::consts::FRAC_PI_2)));
    let world = Pose::from_position(Vec3::new(1.0, 0.0, 1.0));
    let rel = to_anchor_frame(&anchor, &world);
    assert!(rel.position.distance(Vec3::new(1.0, 0.0, 0.0)) < 1e-12);
    assert!(rel.orientation.approx_same_rotation(UnitQuat::from_yaw(-std::f64::consts::FRAC_PI_2), 1e-12));
}

#[test]
fn interpolation_midpoint() {
    let a = Pose::new(Vec3::new(0.0, 1.0, 0.0), UnitQuat::IDENTITY);
    let b = Pose::new(Vec3::new(2.0, 1.0, -4.0), UnitQuat::from_yaw(1.0));
    let mid = pose_interpolate((Timestamp(1_000_000), &a), (Timestamp(3_000_000), &b), Timestamp(2_000_000));
    assert_eq!(mid.position, Vec3::new(1.0, 1.0, -2.0));
    assert!(mid.orientation.approx_same_rotation(UnitQuat::from_yaw(0.5), 1e-12));
}
