use nalgebra::{Matrix3, Vector3};

use eyecontact::headpose::rotation_angle_between;
use eyecontact::pipeline::{annotate_poses, cluster_labels, predict, train};
use eyecontact::records::LabelSource;
use eyecontact::synth::{generate, SynthConfig, SynthDataset};
use eyecontact::{FaceModel3D, Label, PipelineConfig};

fn dataset(cfg: SynthConfig) -> SynthDataset {
    generate(&cfg).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn poses_track_hidden_head_motion() {
    let data = dataset(SynthConfig {
        participants: 2,
        frames_per_session: 200,
        seed: 11,
        ..Default::default()
    });
    let cfg = PipelineConfig::default();
    let out = annotate_poses(&data.records, &cfg, &FaceModel3D::canonical());
    assert_eq!(out.failures, 0);

    let mut rot_err = Vec::new();
    let mut trans_err = Vec::new();
    for (r, t) in out.records.iter().zip(&data.truth) {
        assert_eq!(r.session_id, t.session_id);
        let Some(p) = &r.pose else { continue };
        let truth_r = Matrix3::from_row_slice(&t.head_rotation);
        let truth_t = Vector3::from_row_slice(&t.head_translation);
        rot_err.push(rotation_angle_between(&p.rotation, &truth_r).to_degrees());
        trans_err.push((p.translation - truth_t).norm() / truth_t.norm());
    }
    assert!(rot_err.len() > 300);
    let (mr, mt) = (median(rot_err), median(trans_err));
    assert!(mr < 3.0, "median rotation error {mr} deg");
    assert!(mt < 0.05, "median relative translation error {mt}");
}

#[test]
fn frames_without_face_pass_through() {
    let data = dataset(SynthConfig {
        participants: 1,
        frames_per_session: 200,
        no_face_share: 0.2,
        seed: 3,
        ..Default::default()
    });
    let out = annotate_poses(&data.records, &PipelineConfig::default(), &FaceModel3D::canonical());
    let mut seen = 0;
    for (a, b) in out.records.iter().zip(&data.records) {
        if !b.face_detected {
            assert_eq!(a, b);
            seen += 1;
        } else {
            assert!(a.pose.is_some() || a.pose_error.is_some());
        }
    }
    assert!(seen > 0);
}

#[test]
fn no_face_everywhere_predicts_no_contact() {
    let cfg = PipelineConfig::default();
    let train_data = dataset(SynthConfig {
        participants: 2,
        frames_per_session: 150,
        ..Default::default()
    });
    let posed = annotate_poses(&train_data.records, &cfg, &FaceModel3D::canonical()).records;
    let model = train(&posed, &cfg, LabelSource::GroundTruth).unwrap();

    let blank = dataset(SynthConfig {
        participants: 1,
        frames_per_session: 50,
        no_face_share: 1.0,
        ..Default::default()
    });
    assert!(blank.truth.iter().all(|t| t.label == Label::NoContact));
    let preds = predict(&model, &blank.records).unwrap();
    assert_eq!(preds.len(), 50);
    assert!(preds.iter().all(|p| p.prediction == Label::NoContact && p.score.is_none()));
}

#[test]
fn cluster_labels_agree_with_truth() {
    let data = dataset(SynthConfig {
        seed: 5,
        ..Default::default()
    });
    let cfg = PipelineConfig::default();
    let posed = annotate_poses(&data.records, &cfg, &FaceModel3D::canonical()).records;
    let c = cluster_labels(&posed, &cfg).unwrap();
    assert!(!c.indices.is_empty());
    let agree = c
        .indices
        .iter()
        .zip(&c.labels)
        .filter(|(&i, &l)| data.truth[i].label == l)
        .count();
    let rate = agree as f64 / c.indices.len() as f64;
    assert!(rate >= 0.99, "agreement {rate}");
}
