mod common;

use common::{consistent_problem, jitter_problem, loop_corr, loop_disp, loop_tf, random_cloud, rng};
use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;

use crosspose::geometry::{random_transform, PointCloud, RigidTransform};
use crosspose::losses::{
    consistency_loss, correspondence_loss, evaluate, ground_truth_transform,
    point_displacement_loss, transform_loss,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn ground_truth_transform_cases() {
    let mut r = rng(3);
    let t = random_transform(&mut r);
    let same = ground_truth_transform(&t, &t);
    assert!(crosspose::geometry::rotation_error_deg(&same, &RigidTransform::identity()) < 1e-12);
    assert!(same.translation().norm() < 1e-12);

    let from_identity = ground_truth_transform(&RigidTransform::identity(), &t);
    assert!((from_identity.rotation() - t.rotation()).norm() < 1e-15);
    assert!((from_identity.translation() - t.translation()).norm() < 1e-15);

    for _ in 0..10 {
        let t_alpha = random_transform(&mut r);
        let t_beta = random_transform(&mut r);
        let gt = ground_truth_transform(&t_alpha, &t_beta);
        let p = Vector3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        let via_gt = gt.apply_point(&t_alpha.apply_point(&p));
        let direct = t_beta.apply_point(&p);
        assert!((via_gt - direct).norm() < 1e-10);
    }
}

#[test]
fn point_displacement_cases() {
    let mut r = rng(11);
    let pa = random_cloud(&mut r, 13);
    let pb = random_cloud(&mut r, 6);
    let gt = random_transform(&mut r);
    assert_eq!(point_displacement_loss(&gt, &gt, &pa, &pb), 0.0);

    // one-point clouds at the origin give the hand value 1 + 1 = 2 exactly
    let origin = PointCloud::new(vec![Vector3::zeros()]).unwrap();
    let shift = RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::x()).unwrap();
    let loss = point_displacement_loss(&shift, &RigidTransform::identity(), &origin, &origin);
    assert_eq!(loss, 2.0);

    // same shift against a generic action cloud still averages to 2
    let loss = point_displacement_loss(&shift, &RigidTransform::identity(), &pa, &origin);
    assert!(close(loss, 2.0, 1e-12), "{loss}");

    for _ in 0..10 {
        let pred = random_transform(&mut r);
        let got = point_displacement_loss(&pred, &gt, &pa, &pb);
        assert!(close(got, loop_disp(&pred, &gt, &pa, &pb), 1e-10));
    }
}

#[test]
fn correspondence_cases() {
    let mut r = rng(19);
    let pa = random_cloud(&mut r, 9);
    let pb = random_cloud(&mut r, 7);
    let gt = random_transform(&mut r);
    let exact_a: Vec<_> = pa.points().iter().map(|p| gt.apply_point(p)).collect();
    let exact_b: Vec<_> = pb.points().iter().map(|p| gt.inverse_apply_point(p)).collect();
    assert_eq!(correspondence_loss(&exact_a, &exact_b, &gt, &pa, &pb), 0.0);

    // dyadic coordinates keep the +1 offset exact in floating point
    let dyadic = PointCloud::new(vec![
        Vector3::new(0.5, -0.25, 0.125),
        Vector3::new(-0.75, 0.5, 0.0),
        Vector3::new(0.25, 0.25, -0.5),
    ])
    .unwrap();
    let offset: Vec<_> = dyadic.points().iter().map(|p| p + Vector3::x()).collect();
    let id = RigidTransform::identity();
    let loss = correspondence_loss(&offset, dyadic.points(), &id, &dyadic, &dyadic);
    assert_eq!(loss, 1.0);

    for _ in 0..10 {
        let noisy_a: Vec<_> = exact_a
            .iter()
            .map(|v| v + Vector3::new(r.random_range(-0.1..0.1), 0.0, 0.0))
            .collect();
        let got = correspondence_loss(&noisy_a, &exact_b, &gt, &pa, &pb);
        assert!(close(got, loop_corr(&noisy_a, &exact_b, &gt, &pa, &pb), 1e-10));
    }
}

#[test]
fn consistency_cases() {
    let mut r = rng(29);
    let pa = random_cloud(&mut r, 8);
    let pb = random_cloud(&mut r, 5);
    let pred = random_transform(&mut r);
    let from_pred_a: Vec<_> = pa.points().iter().map(|p| pred.apply_point(p)).collect();
    let from_pred_b: Vec<_> = pb.points().iter().map(|p| pred.inverse_apply_point(p)).collect();
    assert_eq!(consistency_loss(&from_pred_a, &from_pred_b, &pred, &pa, &pb), 0.0);

    // with pred = gt the two losses coincide definitionally
    let noisy_a: Vec<_> = from_pred_a.iter().map(|v| v + Vector3::y() * 0.03).collect();
    let cons = consistency_loss(&noisy_a, &from_pred_b, &pred, &pa, &pb);
    let corr = correspondence_loss(&noisy_a, &from_pred_b, &pred, &pa, &pb);
    assert!((cons - corr).abs() <= 1e-12 * corr.max(1.0));
}

#[test]
fn transform_loss_cases() {
    let mut r = rng(37);
    let gt = random_transform(&mut r);
    assert_eq!(transform_loss(&gt, &gt), 0.0);

    let shift = RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::x()).unwrap();
    assert_eq!(transform_loss(&RigidTransform::identity(), &shift), 1.0);

    for _ in 0..10 {
        let pred = random_transform(&mut r);
        let got = transform_loss(&pred, &gt);
        assert!(close(got, loop_tf(&pred, &gt), 1e-12));
    }
}

#[test]
fn losses_are_zero_iff_exact() {
    let mut r = rng(43);
    let (problem, gt) = consistent_problem(&mut r, 10, 8, 0.5);
    let bundle = evaluate(&problem, &gt, &gt);
    assert_eq!(
        (bundle.disp, bundle.corr, bundle.cons, bundle.tf),
        (0.0, 0.0, 0.0, 0.0)
    );

    let off = gt
        .compose(&RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::z() * 0.01).unwrap());
    let bundle = evaluate(&problem, &off, &gt);
    assert!(bundle.disp > 0.0 && bundle.cons > 0.0 && bundle.tf > 0.0);

    let noisy = jitter_problem(&mut r, &problem, 0.02);
    let bundle = evaluate(&noisy, &gt, &gt);
    assert!(bundle.corr > 0.0 && bundle.cons > 0.0);
    assert_eq!((bundle.disp, bundle.tf), (0.0, 0.0));
}

#[test]
fn displacement_is_permutation_invariant() {
    let mut r = rng(53);
    let pa = random_cloud(&mut r, 12);
    let pb = random_cloud(&mut r, 9);
    let pred = random_transform(&mut r);
    let gt = random_transform(&mut r);
    let base = point_displacement_loss(&pred, &gt, &pa, &pb);

    let mut shuffled_a = pa.points().to_vec();
    let mut shuffled_b = pb.points().to_vec();
    shuffled_a.shuffle(&mut r);
    shuffled_b.shuffle(&mut r);
    let shuffled = point_displacement_loss(
        &pred,
        &gt,
        &PointCloud::new(shuffled_a).unwrap(),
        &PointCloud::new(shuffled_b).unwrap(),
    );
    assert!(close(base, shuffled, 1e-12));
}

#[test]
fn losses_are_continuous_in_their_inputs() {
    let mut r = rng(59);
    let (problem, gt) = consistent_problem(&mut r, 10, 7, 0.5);
    let noisy = jitter_problem(&mut r, &problem, 0.05);
    let pred = random_transform(&mut r);
    let eps = 1e-6;

    // nudge the predicted translation
    let nudged = RigidTransform::new(*pred.rotation(), pred.translation() + Vector3::x() * eps)
        .unwrap();
    let slope = 100.0 * eps;
    let b0 = evaluate(&noisy, &pred, &gt);
    let b1 = evaluate(&noisy, &nudged, &gt);
    assert!((b1.disp - b0.disp).abs() < slope);
    assert!((b1.cons - b0.cons).abs() < slope);
    assert!((b1.tf - b0.tf).abs() < slope);

    // nudge one correspondence entry
    let mut corr_a = noisy.corr_action().to_vec();
    corr_a[0] += Vector3::y() * eps;
    let c0 = correspondence_loss(
        noisy.corr_action(),
        noisy.corr_anchor(),
        &gt,
        noisy.action_cloud(),
        noisy.anchor_cloud(),
    );
    let c1 = correspondence_loss(
        &corr_a,
        noisy.corr_anchor(),
        &gt,
        noisy.action_cloud(),
        noisy.anchor_cloud(),
    );
    assert!((c1 - c0).abs() < slope);
}

#[test]
fn evaluate_matches_component_calls() {
    let mut r = rng(61);
    let (problem, gt) = consistent_problem(&mut r, 11, 6, 0.3);
    let noisy = jitter_problem(&mut r, &problem, 0.04);
    let pred = random_transform(&mut r);
    let bundle = evaluate(&noisy, &pred, &gt);
    assert_eq!(
        bundle.disp,
        point_displacement_loss(&pred, &gt, noisy.action_cloud(), noisy.anchor_cloud())
    );
    assert_eq!(
        bundle.corr,
        correspondence_loss(
            noisy.corr_action(),
            noisy.corr_anchor(),
            &gt,
            noisy.action_cloud(),
            noisy.anchor_cloud()
        )
    );
    assert_eq!(
        bundle.cons,
        consistency_loss(
            noisy.corr_action(),
            noisy.corr_anchor(),
            &pred,
            noisy.action_cloud(),
            noisy.anchor_cloud()
        )
    );
    assert_eq!(bundle.tf, transform_loss(&pred, &gt));
}
