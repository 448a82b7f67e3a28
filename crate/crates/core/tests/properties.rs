use nalgebra::{DMatrix, DVector, Matrix2, Point2, Rotation3, Vector2, Vector3};
use proptest::prelude::*;

use eyecontact::classify::{pca_fit, svm_train, SvmModel, SvmParams};
use eyecontact::gaze::{angles_to_vector, vector_to_angles, GazeAngles, GazePoint2D};
use eyecontact::headpose::{
    refine_lm, reprojection_rmse, rotation_angle_between, solve_epnp, CameraIntrinsics, FaceModel3D, HeadPose,
    LmParams,
};
use eyecontact::labeling::{select_device_cluster, OpticsParams};
use eyecontact::metrics::{attention_report, mcc, Block, ConfusionMatrix, Focus, Timeline};
use eyecontact::normalize::{normalization_transform, HeadFrame, NormParams};
use eyecontact::records::{dataset_to_string, parse_dataset, FrameRecord, Label, PoseAnnotation};

fn camera() -> CameraIntrinsics<f64> {
    CameraIntrinsics::new(640.0, 640.0, 319.5, 239.5).unwrap()
}

fn rotation(a: f64, b: f64, c: f64) -> nalgebra::Matrix3<f64> {
    *Rotation3::from_euler_angles(a, b, c).matrix()
}

prop_compose! {
    fn arb_record()(
        face in any::<bool>(),
        conf in 0.0f64..=1.0,
        lm in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 68),
        feats in prop::collection::vec(-1e6f64..1e6, 4),
        gaze in (-1.5f64..1.5, -3.0f64..3.0),
        label in prop::option::of(any::<bool>()),
        illum in prop::option::of("[a-z]{1,8}"),
        rot in (-3.0f64..3.0, -1.5f64..1.5, -3.0f64..3.0),
        trans in (-100.0f64..100.0, -100.0f64..100.0, 100.0f64..900.0),
        with_pose in any::<bool>(),
        t in 0.0f64..1e6,
    ) -> FrameRecord {
        let mut r = FrameRecord::no_face("sess", "part", t, 640, 480);
        r.label = label.map(Label::from_positive);
        r.illumination = illum;
        if face {
            r.face_detected = true;
            r.face_confidence = Some(conf);
            r.landmarks = Some(lm.into_iter().map(|(x, y)| Point2::new(x, y)).collect());
            r.features = Some(feats);
            r.gaze = Some(GazeAngles::new(gaze.0, gaze.1));
            if with_pose {
                r.pose = Some(PoseAnnotation {
                    rotation: rotation(rot.0, rot.1, rot.2),
                    translation: Vector3::new(trans.0, trans.1, trans.2),
                    reprojection_rmse: conf,
                    headpose_n: GazeAngles::new(gaze.1 / 3.0, gaze.0),
                    gaze_origin: Vector3::new(trans.1, trans.0, trans.2),
                    norm_rotation: rotation(rot.2, rot.1, rot.0),
                });
            }
        }
        r
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_roundtrip_losslessly(r in arb_record()) {
        let text = dataset_to_string(std::slice::from_ref(&r)).unwrap();
        let back = parse_dataset(&text).unwrap();
        prop_assert_eq!(back, vec![r]);
    }

    #[test]
    fn gaze_angles_roundtrip(p in -1.55f64..1.55, y in -3.1f64..3.1) {
        let g = vector_to_angles(&angles_to_vector(&GazeAngles::new(p, y))).unwrap();
        prop_assert!((g.pitch - p).abs() < 1e-9 && (g.yaw - y).abs() < 1e-9);
    }

    #[test]
    fn gaze_vector_scale_invariant(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..-0.01, s in 0.01f64..100.0) {
        let v = Vector3::new(x, y, z);
        let a = vector_to_angles(&v).unwrap();
        let b = vector_to_angles(&(v * s)).unwrap();
        prop_assert!((a.pitch - b.pitch).abs() < 1e-12 && (a.yaw - b.yaw).abs() < 1e-12);
    }

    #[test]
    fn normalization_rotation_invariants(
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
        cx in -200.0f64..200.0, cy in -200.0f64..200.0, cz in 150.0f64..1000.0,
    ) {
        let r = rotation(a, b, c);
        let origin = Vector3::new(cx, cy, cz);
        let frame = HeadFrame {
            origin,
            x_axis: r.column(0).into_owned(),
            y_axis: r.column(1).into_owned(),
            z_axis: r.column(2).into_owned(),
        };
        let n = normalization_transform(&frame, &camera(), &NormParams::default(), None).unwrap();
        prop_assert!((n.rot * n.rot.transpose() - nalgebra::Matrix3::identity()).amax() < 1e-12);
        prop_assert!((n.rot.determinant() - 1.0).abs() < 1e-12);
        prop_assert!((n.rot * origin - Vector3::new(0.0, 0.0, origin.norm())).amax() < 1e-9);
        prop_assert!((n.rot * frame.x_axis).y.abs() < 1e-12);
        prop_assert!((n.scale * origin.norm() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn epnp_then_lm_recovers_exact_pose(
        a in -0.9f64..0.9, b in -0.9f64..0.9, c in -0.9f64..0.9,
        tx in -80.0f64..80.0, ty in -80.0f64..80.0, tz in 250.0f64..800.0,
    ) {
        let model = FaceModel3D::canonical();
        let truth = HeadPose::new(rotation(a, b, c), Vector3::new(tx, ty, tz));
        let k = camera();
        let pts: Vec<_> = model.points().iter().map(|p| k.project(&truth.transform(p)).unwrap()).collect();
        let init = solve_epnp(&model, &pts, &k).unwrap();
        let est = refine_lm(&init, &model, &pts, &k, &LmParams::default()).unwrap();
        prop_assert!(rotation_angle_between(&est.rotation, &truth.rotation).to_degrees() < 1e-3);
        prop_assert!((est.translation - truth.translation).norm() < 1e-3);
        prop_assert!(est.reprojection_rmse <= init.reprojection_rmse);
    }

    #[test]
    fn lm_never_increases_rmse(
        a in -0.8f64..0.8, b in -0.8f64..0.8, c in -0.8f64..0.8,
        da in -0.3f64..0.3, db in -0.3f64..0.3, dt in -40.0f64..40.0,
        noise in prop::collection::vec(-2.0f64..2.0, 136),
    ) {
        let model = FaceModel3D::canonical();
        let truth = HeadPose::new(rotation(a, b, c), Vector3::new(10.0, -5.0, 450.0));
        let k = camera();
        let pts: Vec<_> = model.points().iter().enumerate()
            .map(|(i, p)| {
                let q = k.project(&truth.transform(p)).unwrap();
                Point2::new(q.x + noise[2 * i], q.y + noise[2 * i + 1])
            })
            .collect();
        let start = HeadPose::new(rotation(a + da, b + db, c), truth.translation + Vector3::new(dt, -dt, 2.0 * dt));
        let before = reprojection_rmse(&start, model.points(), &pts, &k);
        let out = refine_lm(&start, &model, &pts, &k, &LmParams::default()).unwrap();
        prop_assert!(reprojection_rmse(&out, model.points(), &pts, &k) <= before);
        prop_assert!(out.orthonormality_error() < 1e-9);
    }

    #[test]
    fn mcc_bounded_and_symmetric(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
        let cm = ConfusionMatrix { tp, tn, fp, fn_ };
        let m = mcc(&cm);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m));
        // Swapping which class counts as positive leaves MCC unchanged.
        let swapped = ConfusionMatrix { tp: tn, tn: tp, fp: fn_, fn_: fp };
        prop_assert!((mcc(&swapped) - m).abs() < 1e-12);
        // Swapping predictions and truth leaves it unchanged as well.
        let transposed = ConfusionMatrix { tp, tn, fp: fn_, fn_: fp };
        prop_assert!((mcc(&transposed) - m).abs() < 1e-12);
    }

    #[test]
    fn pca_components_orthonormal_and_sorted(
        data in prop::collection::vec(-10.0f64..10.0, 40 * 6),
        retain in 0.5f64..1.0,
    ) {
        let x = DMatrix::from_row_slice(40, 6, &data);
        let m = pca_fit(&x, retain).unwrap();
        let k = m.output_dim();
        prop_assert!((1..=6).contains(&k));
        let gram = &m.components * m.components.transpose();
        prop_assert!((gram - DMatrix::identity(k, k)).amax() < 1e-9);
        let ev = m.explained_variance.as_slice();
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        prop_assert!(m.explained_variance.sum() >= retain * m.total_variance * (1.0 - 1e-9));
        if k > 1 {
            prop_assert!(m.explained_variance.rows(0, k - 1).sum() < retain * m.total_variance);
        }
        // Projected coordinates are centred and carry the reported variance.
        let z = m.project_rows(&x).unwrap();
        for (j, &e) in ev.iter().enumerate().take(k) {
            let col = z.column(j);
            prop_assert!(col.mean().abs() < 1e-9);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 39.0;
            prop_assert!((var - e).abs() < 1e-8 * (1.0 + e));
        }
    }

    #[test]
    fn svm_beats_zero_model_and_scales(
        data in prop::collection::vec(-3.0f64..3.0, 30 * 3),
        labels in prop::collection::vec(any::<bool>(), 30),
        c in 0.05f64..5.0,
    ) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let x = DMatrix::from_row_slice(30, 3, &data);
        let y: Vec<i8> = labels.iter().map(|&l| if l { 1 } else { -1 }).collect();
        let params = SvmParams { c, ..Default::default() };
        let m = svm_train(&x, &y, &params).unwrap();
        let zero = SvmModel { weights: DVector::zeros(3), bias: 0.0, ..m.clone() };
        prop_assert!(m.objective(&x, &y) <= zero.objective(&x, &y) + 1e-9);

        // x' = 4x with C' = C/16 scales every dual quantity by a power of two,
        // so the solver takes the same steps.
        let m4 = svm_train(&(&x * 4.0), &y, &SvmParams { c: c / 16.0, ..params }).unwrap();
        for i in 0..30 {
            let r: Vec<f64> = x.row(i).iter().copied().collect();
            let r4: Vec<f64> = r.iter().map(|v| v * 4.0).collect();
            let (a, b) = (m.decision(&r).unwrap(), m4.decision(&r4).unwrap());
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
        }
    }

    #[test]
    fn device_cluster_invariant_under_rotation(theta in 0.0f64..std::f64::consts::TAU, seed in 0u64..1000) {
        let mut pts = Vec::new();
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for (cx, cy, n) in [(10.0, 20.0, 60), (300.0, -200.0, 80), (-350.0, 150.0, 40)] {
            for _ in 0..n {
                pts.push(GazePoint2D::new(cx + 30.0 * next(), cy + 30.0 * next()));
            }
        }
        let rot = Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
        let rotated: Vec<_> = pts.iter().map(|p| {
            let v = rot * Vector2::new(p.x, p.y);
            GazePoint2D::new(v.x, v.y)
        }).collect();
        let params = OpticsParams::default();
        let a = params.cluster(&pts).unwrap();
        let b = params.cluster(&rotated).unwrap();
        let da = select_device_cluster(&a).unwrap();
        let db = select_device_cluster(&b).unwrap();
        let members = |l: &[Option<usize>], d| l.iter().map(|c| *c == Some(d)).collect::<Vec<_>>();
        prop_assert_eq!(members(&a.labels, da), members(&b.labels, db));
    }

    #[test]
    fn attention_totals_cover_timeline(durations in prop::collection::vec(0.1f64..10.0, 1..20), start_dev in any::<bool>()) {
        let mut blocks = Vec::new();
        let mut t = 0.0;
        for (i, d) in durations.iter().enumerate() {
            let dev = (i % 2 == 0) == start_dev;
            blocks.push(Block::new(if dev { Focus::Device } else { Focus::Environment }, t, t + d));
            t += d;
        }
        let tl = Timeline::from_blocks("s", blocks).unwrap();
        let r = attention_report(&tl, 2.0);
        prop_assert!((r.device.total + r.environment.total - tl.duration()).abs() < 1e-9);
        prop_assert!(r.glances <= r.device.count);
        prop_assert_eq!(r.shifts_env_to_dev + r.shifts_dev_to_env, durations.len() - 1);
        prop_assert!(r.shifts_env_to_dev.abs_diff(r.shifts_dev_to_env) <= 1);
    }
}
