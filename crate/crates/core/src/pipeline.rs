//! Stage wiring shared by the command-line tool and the end-to-end tests:
//! pose annotation, on-plane gaze points, cluster labels, training and
//! prediction.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::classify::{pca_fit, svm_train};
use crate::config::PipelineConfig;
use crate::gaze::{apply_threshold, gaze_origin, on_plane_point, GazePoint2D, GazeSource};
use crate::headpose::{
    default_intrinsics, kalman_step, refine_lm, reprojection_rmse, solve_epnp, FaceModel3D, HeadPose,
    KalmanState, LandmarkIndexMap,
};
use crate::labeling::{assign_labels, filter_confidence, select_device_cluster, ClusterAssignment};
use crate::normalize::{head_frame, normalization_transform};
use crate::records::{FrameRecord, Label, LabelSource, ModelArtifact, PoseAnnotation, PredictionRecord};
use crate::{Error, Result};

/// Output of [`annotate_poses`].
pub struct PoseOutput {
    pub records: Vec<FrameRecord>,
    /// Face frames whose pose could not be estimated.
    pub failures: usize,
}

/// Estimates head pose and normalization for every face frame. Sessions run
/// in parallel; frames within a session run in time order through the
/// Kalman filter. Failures are recorded on the frame and never abort the run.
pub fn annotate_poses(records: &[FrameRecord], cfg: &PipelineConfig, model: &FaceModel3D<f64>) -> PoseOutput {
    let map = LandmarkIndexMap::default();
    let mut sessions: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let s = *index.entry(r.session_id.as_str()).or_insert_with(|| {
            sessions.push(Vec::new());
            sessions.len() - 1
        });
        sessions[s].push(i);
    }

    let annotated: Vec<Vec<(usize, FrameRecord)>> = sessions
        .par_iter()
        .map(|idx| {
            let mut state: Option<KalmanState<f64>> = None;
            idx.iter()
                .map(|&i| {
                    let mut r = records[i].clone();
                    if r.face_detected {
                        r.pose = None;
                        r.pose_error = None;
                        match annotate_frame(&r, cfg, model, &map, &mut state) {
                            Ok(p) => r.pose = Some(p),
                            Err(e) => {
                                log::warn!("{} t={}: pose failed: {e}", r.session_id, r.t);
                                r.pose_error = Some(e.to_string());
                            }
                        }
                    }
                    (i, r)
                })
                .collect()
        })
        .collect();

    let mut out: Vec<Option<FrameRecord>> = vec![None; records.len()];
    for (i, r) in annotated.into_iter().flatten() {
        out[i] = Some(r);
    }
    let records: Vec<FrameRecord> = out.into_iter().map(|r| r.expect("every index visited")).collect();
    let failures = records.iter().filter(|r| r.pose_error.is_some()).count();
    PoseOutput { records, failures }
}

fn annotate_frame(
    r: &FrameRecord,
    cfg: &PipelineConfig,
    model: &FaceModel3D<f64>,
    map: &LandmarkIndexMap,
    state: &mut Option<KalmanState<f64>>,
) -> Result<PoseAnnotation> {
    let landmarks = r
        .landmarks
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("face frame without landmarks".into()))?;
    let k = default_intrinsics(r.image_w, r.image_h)?;
    let initial = solve_epnp(model, landmarks, &k)?;
    let mut pose = refine_lm(&initial, model, landmarks, &k, &cfg.lm)?;
    if cfg.use_kalman {
        let (next, smoothed) = kalman_step(state.as_ref(), &pose, r.t, &cfg.kalman)?;
        *state = Some(next);
        pose = HeadPose {
            reprojection_rmse: reprojection_rmse(&smoothed, model.points(), landmarks, &k),
            ..smoothed
        };
    }
    let frame = head_frame(&pose, model, map)?;
    let norm = normalization_transform(&frame, &k, &cfg.normalization, None)?;
    Ok(PoseAnnotation {
        rotation: pose.rotation,
        translation: pose.translation,
        reprojection_rmse: pose.reprojection_rmse,
        headpose_n: norm.headpose_n,
        gaze_origin: gaze_origin(&pose, model, map),
        norm_rotation: norm.rot,
    })
}

/// Effective gaze of one pose-annotated frame intersected with the camera
/// plane. `Ok(None)` when the frame has no pose.
pub fn gaze_point(r: &FrameRecord, cfg: &PipelineConfig) -> Result<Option<(GazePoint2D<f64>, GazeSource)>> {
    let Some(p) = &r.pose else {
        return Ok(None);
    };
    let (eff, src) = apply_threshold(r.gaze, p.headpose_n, cfg.threshold_pitch(), cfg.threshold_yaw());
    let pt = on_plane_point(&eff, &p.norm_rotation, &p.gaze_origin, cfg.intersection_plane)?;
    Ok(Some((pt, src)))
}

/// Training labels derived without annotations.
#[derive(Debug, Clone)]
pub struct ClusterLabels {
    /// Record indices used for training, ascending.
    pub indices: Vec<usize>,
    pub labels: Vec<Label>,
    /// Record indices of the clustered points, aligned with the assignment.
    pub clustered: Vec<usize>,
    pub points: Vec<GazePoint2D<f64>>,
    pub assignment: ClusterAssignment<f64>,
    pub device_cluster: usize,
    /// Frames whose effective gaze came from the head pose.
    pub proxy_count: usize,
}

/// Confidence filter, thresholding, plane intersection, OPTICS and device
/// cluster selection. Frames whose gaze never reaches the camera plane are
/// kept as negatives without being clustered.
pub fn cluster_labels(records: &[FrameRecord], cfg: &PipelineConfig) -> Result<ClusterLabels> {
    let mut clustered = Vec::new();
    let mut points = Vec::new();
    let mut away = Vec::new();
    let mut proxy_count = 0;
    for i in filter_confidence(records, cfg.confidence_threshold) {
        let r = &records[i];
        if r.features.is_none() {
            continue;
        }
        match gaze_point(r, cfg) {
            Ok(Some((p, src))) => {
                proxy_count += usize::from(src == GazeSource::HeadPoseProxy);
                clustered.push(i);
                points.push(p);
            }
            Ok(None) => {}
            Err(Error::NoIntersection) => away.push(i),
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no frame with a pose and features passes the confidence filter".into()));
    }
    let assignment = cfg.optics.cluster(&points)?;
    let device_cluster = select_device_cluster(&assignment)?;
    let point_labels = assign_labels(&assignment, device_cluster);

    let mut labelled: Vec<(usize, Label)> = clustered
        .iter()
        .zip(&point_labels)
        .zip(&assignment.labels)
        .filter(|(_, cl)| !(cfg.optics.drop_noise && cl.is_none()))
        .map(|((&i, &l), _)| (i, l))
        .chain(away.iter().map(|&i| (i, Label::NoContact)))
        .collect();
    labelled.sort_by_key(|&(i, _)| i);
    let (indices, labels) = labelled.into_iter().unzip();
    Ok(ClusterLabels {
        indices,
        labels,
        clustered,
        points,
        assignment,
        device_cluster,
        proxy_count,
    })
}

/// Record indices and labels the classifier is trained on.
pub fn training_labels(
    records: &[FrameRecord],
    cfg: &PipelineConfig,
    source: LabelSource,
) -> Result<(Vec<usize>, Vec<Label>)> {
    match source {
        LabelSource::Cluster => {
            let c = cluster_labels(records, cfg)?;
            Ok((c.indices, c.labels))
        }
        LabelSource::GroundTruth => {
            let mut idx = Vec::new();
            let mut labels = Vec::new();
            for i in filter_confidence(records, cfg.confidence_threshold) {
                let r = &records[i];
                if r.features.is_none() {
                    continue;
                }
                let l = r.label.ok_or_else(|| Error::Session {
                    session: r.session_id.clone(),
                    msg: format!("frame t={} has no ground-truth label", r.t),
                })?;
                idx.push(i);
                labels.push(l);
            }
            Ok((idx, labels))
        }
    }
}

/// PCA followed by the weighted SVM on the selected frames.
pub fn train(records: &[FrameRecord], cfg: &PipelineConfig, source: LabelSource) -> Result<ModelArtifact> {
    cfg.validate()?;
    if !records.iter().any(|r| r.features.is_some()) {
        return Err(Error::InvalidInput("dataset has no feature vectors".into()));
    }
    let (idx, labels) = training_labels(records, cfg, source)?;
    if idx.is_empty() {
        return Err(Error::InvalidInput("no frame left for training".into()));
    }
    let dim = records[idx[0]].features.as_ref().map_or(0, Vec::len);
    let mut x = DMatrix::zeros(idx.len(), dim);
    for (row, &i) in idx.iter().enumerate() {
        let f = records[i].features.as_ref().expect("filtered on features");
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        x.row_mut(row).copy_from_slice(f);
    }
    let y: Vec<i8> = labels.iter().map(|l| l.sign()).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    let pca = pca_fit(&x, cfg.pca_retain)?;
    let z = pca.project_rows(&x)?;
    let svm = svm_train(&z, &y, &cfg.svm)?;
    log::info!(
        "trained on {} frames ({} positive), {} -> {} dims",
        y.len(),
        y.iter().filter(|&&v| v > 0).count(),
        dim,
        pca.output_dim()
    );
    Ok(ModelArtifact {
        pca,
        svm,
        label_source: source,
        config: cfg.clone(),
    })
}

/// Frames without a face or without features are predicted as no contact
/// and carry no score.
pub fn predict_record(model: &ModelArtifact, r: &FrameRecord) -> Result<PredictionRecord> {
    let (prediction, score) = match (&r.features, r.face_detected) {
        (Some(f), true) => {
            let (l, s) = model.predict(f)?;
            (l, Some(s))
        }
        _ => (Label::NoContact, None),
    };
    Ok(PredictionRecord {
        session_id: r.session_id.clone(),
        participant_id: r.participant_id.clone(),
        t: r.t,
        prediction,
        score,
        truth: r.label,
        illumination: r.illumination.clone(),
    })
}

pub fn predict(model: &ModelArtifact, records: &[FrameRecord]) -> Result<Vec<PredictionRecord>> {
    records.par_iter().map(|r| predict_record(model, r)).collect()
}
