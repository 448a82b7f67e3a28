//! Frame records (JSONL) and the trained model artifact (JSON).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::classify::{PcaModel, SvmModel};
use crate::config::PipelineConfig;
use crate::gaze::GazeAngles;
use crate::headpose::{HeadPose, NUM_LANDMARKS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Contact,
    NoContact,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Contact
    }

    pub fn from_positive(p: bool) -> Self {
        if p {
            Label::Contact
        } else {
            Label::NoContact
        }
    }

    /// +1 for contact, −1 otherwise.
    pub fn sign(self) -> i8 {
        if self.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Contact => "contact",
            Label::NoContact => "no_contact",
        }
    }
}

/// Head pose and normalization results attached to a frame by the pose stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseAnnotation {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub reprojection_rmse: f64,
    /// Head facing direction in normalized space.
    pub headpose_n: GazeAngles<f64>,
    /// Camera-space midpoint of the eyes, mm.
    pub gaze_origin: Vector3<f64>,
    /// Camera to normalized camera.
    pub norm_rotation: Matrix3<f64>,
}

impl PoseAnnotation {
    pub fn head_pose(&self) -> HeadPose<f64> {
        HeadPose {
            rotation: self.rotation,
            translation: self.translation,
            reprojection_rmse: self.reprojection_rmse,
        }
    }
}

/// Observations derived from one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub session_id: String,
    pub participant_id: String,
    /// Seconds, strictly increasing within a session.
    pub t: f64,
    pub image_w: u32,
    pub image_h: u32,
    pub face_detected: bool,
    pub face_confidence: Option<f64>,
    pub landmarks: Option<Vec<Point2<f64>>>,
    pub features: Option<Vec<f64>>,
    /// Normalized-space gaze estimate.
    pub gaze: Option<GazeAngles<f64>>,
    pub label: Option<Label>,
    pub illumination: Option<String>,
    pub pose: Option<PoseAnnotation>,
    /// Why the pose stage failed on this frame, if it did.
    pub pose_error: Option<String>,
}

impl FrameRecord {
    /// A frame in which the face detector found nothing.
    pub fn no_face(session_id: &str, participant_id: &str, t: f64, image_w: u32, image_h: u32) -> Self {
        Self {
            session_id: session_id.to_string(),
            participant_id: participant_id.to_string(),
            t,
            image_w,
            image_h,
            face_detected: false,
            face_confidence: None,
            landmarks: None,
            features: None,
            gaze: None,
            label: None,
            illumination: None,
            pose: None,
            pose_error: None,
        }
    }

    /// Checks every per-record invariant.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.t.is_finite() {
            return Err("timestamp must be finite".into());
        }
        if !self.face_detected
            && (self.landmarks.is_some() || self.features.is_some() || self.gaze.is_some() || self.pose.is_some())
        {
            return Err("landmarks, features, gaze and pose must be absent when no face is detected".into());
        }
        if let Some(c) = self.face_confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("face_confidence {c} outside [0, 1]"));
            }
        }
        if let Some(l) = &self.landmarks {
            if l.len() != NUM_LANDMARKS {
                return Err(format!("expected {NUM_LANDMARKS} landmarks, got {}", l.len()));
            }
            if l.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
                return Err("landmark coordinates must be finite".into());
            }
        }
        if let Some(f) = &self.features {
            if f.is_empty() || f.iter().any(|v| !v.is_finite()) {
                return Err("features must be a non-empty finite vector".into());
            }
        }
        if let Some(g) = &self.gaze {
            if !(g.pitch.is_finite() && g.yaw.is_finite()) {
                return Err("gaze angles must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    session_id: String,
    participant_id: String,
    t: f64,
    image_w: u32,
    image_h: u32,
    face_detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    face_confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    landmarks: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaze_pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaze_yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    illumination: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head_rotation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head_translation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reprojection_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head_pitch_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head_yaw_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaze_origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm_rotation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose_error: Option<String>,
}

fn mat_rows(m: &Matrix3<f64>) -> Vec<f64> {
    (0..3).flat_map(|r| (0..3).map(move |c| m[(r, c)])).collect()
}

fn rows_mat(v: &[f64], name: &str) -> std::result::Result<Matrix3<f64>, String> {
    if v.len() != 9 {
        return Err(format!("{name} needs 9 numbers, got {}", v.len()));
    }
    Ok(Matrix3::from_row_slice(v))
}

fn vec3(v: &[f64], name: &str) -> std::result::Result<Vector3<f64>, String> {
    if v.len() != 3 {
        return Err(format!("{name} needs 3 numbers, got {}", v.len()));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

impl From<&FrameRecord> for RecordLine {
    fn from(r: &FrameRecord) -> Self {
        let p = r.pose.as_ref();
        RecordLine {
            session_id: r.session_id.clone(),
            participant_id: r.participant_id.clone(),
            t: r.t,
            image_w: r.image_w,
            image_h: r.image_h,
            face_detected: r.face_detected,
            face_confidence: r.face_confidence,
            landmarks: r
                .landmarks
                .as_ref()
                .map(|l| l.iter().flat_map(|p| [p.x, p.y]).collect()),
            features: r.features.clone(),
            gaze_pitch: r.gaze.map(|g| g.pitch),
            gaze_yaw: r.gaze.map(|g| g.yaw),
            label: r.label,
            illumination: r.illumination.clone(),
            head_rotation: p.map(|p| mat_rows(&p.rotation)),
            head_translation: p.map(|p| p.translation.iter().copied().collect()),
            reprojection_rmse: p.map(|p| p.reprojection_rmse),
            head_pitch_n: p.map(|p| p.headpose_n.pitch),
            head_yaw_n: p.map(|p| p.headpose_n.yaw),
            gaze_origin: p.map(|p| p.gaze_origin.iter().copied().collect()),
            norm_rotation: p.map(|p| mat_rows(&p.norm_rotation)),
            pose_error: r.pose_error.clone(),
        }
    }
}

impl TryFrom<RecordLine> for FrameRecord {
    type Error = String;

    fn try_from(l: RecordLine) -> std::result::Result<Self, String> {
        let landmarks = match l.landmarks {
            None => None,
            Some(v) => {
                if v.len() != 2 * NUM_LANDMARKS {
                    return Err(format!(
                        "landmarks need {} numbers ({NUM_LANDMARKS} points), got {}",
                        2 * NUM_LANDMARKS,
                        v.len()
                    ));
                }
                Some(v.chunks(2).map(|c| Point2::new(c[0], c[1])).collect())
            }
        };
        let gaze = match (l.gaze_pitch, l.gaze_yaw) {
            (Some(p), Some(y)) => Some(GazeAngles::new(p, y)),
            (None, None) => None,
            _ => return Err("gaze_pitch and gaze_yaw must appear together".into()),
        };
        let pose_fields = [
            l.head_rotation.is_some(),
            l.head_translation.is_some(),
            l.reprojection_rmse.is_some(),
            l.head_pitch_n.is_some(),
            l.head_yaw_n.is_some(),
            l.gaze_origin.is_some(),
            l.norm_rotation.is_some(),
        ];
        let pose = if pose_fields.iter().all(|&b| b) {
            Some(PoseAnnotation {
                rotation: rows_mat(l.head_rotation.as_deref().unwrap_or_default(), "head_rotation")?,
                translation: vec3(l.head_translation.as_deref().unwrap_or_default(), "head_translation")?,
                reprojection_rmse: l.reprojection_rmse.unwrap_or_default(),
                headpose_n: GazeAngles::new(l.head_pitch_n.unwrap_or_default(), l.head_yaw_n.unwrap_or_default()),
                gaze_origin: vec3(l.gaze_origin.as_deref().unwrap_or_default(), "gaze_origin")?,
                norm_rotation: rows_mat(l.norm_rotation.as_deref().unwrap_or_default(), "norm_rotation")?,
            })
        } else if pose_fields.iter().any(|&b| b) {
            return Err("pose fields must appear together".into());
        } else {
            None
        };
        let r = FrameRecord {
            session_id: l.session_id,
            participant_id: l.participant_id,
            t: l.t,
            image_w: l.image_w,
            image_h: l.image_h,
            face_detected: l.face_detected,
            face_confidence: l.face_confidence,
            landmarks,
            features: l.features,
            gaze,
            label: l.label,
            illumination: l.illumination,
            pose,
            pose_error: l.pose_error,
        };
        r.validate()?;
        Ok(r)
    }
}

/// Serializes one record as a single JSON line (no trailing newline).
pub fn record_to_line(r: &FrameRecord) -> Result<String> {
    Ok(serde_json::to_string(&RecordLine::from(r))?)
}

/// Parses and validates records, one JSON object per non-blank line.
/// Records are grouped by session in order of first appearance; within a
/// session the file order must already be strictly increasing in time.
pub fn parse_dataset(text: &str) -> Result<Vec<FrameRecord>> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())), None)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<FrameRecord>> {
    let f = File::open(path)?;
    parse_lines(BufReader::new(f).lines().map(|l| l.map_err(Error::from)), None)
}

/// Like [`read_dataset`], but a record that fails validation is skipped and
/// its error returned alongside the records that were read. I/O errors are
/// still fatal.
pub fn read_dataset_lenient(path: impl AsRef<Path>) -> Result<(Vec<FrameRecord>, Vec<Error>)> {
    let f = File::open(path)?;
    let mut rejected = Vec::new();
    let recs = parse_lines(BufReader::new(f).lines().map(|l| l.map_err(Error::from)), Some(&mut rejected))?;
    Ok((recs, rejected))
}

fn parse_lines(
    lines: impl Iterator<Item = Result<String>>,
    mut rejected: Option<&mut Vec<Error>>,
) -> Result<Vec<FrameRecord>> {
    let mut sessions: Vec<(String, Vec<FrameRecord>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut dim: Option<(usize, usize)> = None;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec = match parse_line(&line, lineno, &mut dim, &sessions, &index) {
            Ok(r) => r,
            Err(e) => match rejected.as_deref_mut() {
                Some(list) => {
                    list.push(e);
                    continue;
                }
                None => return Err(e),
            },
        };
        if let (Some(f), None) = (&rec.features, dim) {
            dim = Some((f.len(), lineno));
        }
        let slot = *index.entry(rec.session_id.clone()).or_insert_with(|| {
            sessions.push((rec.session_id.clone(), Vec::new()));
            sessions.len() - 1
        });
        sessions[slot].1.push(rec);
    }
    Ok(sessions.into_iter().flat_map(|(_, v)| v).collect())
}

fn parse_line(
    line: &str,
    lineno: usize,
    dim: &mut Option<(usize, usize)>,
    sessions: &[(String, Vec<FrameRecord>)],
    index: &HashMap<String, usize>,
) -> Result<FrameRecord> {
    let raw: RecordLine = serde_json::from_str(line).map_err(|e| Error::Schema {
        line: lineno,
        msg: e.to_string(),
    })?;
    let rec = FrameRecord::try_from(raw).map_err(|msg| Error::Schema { line: lineno, msg })?;
    if let (Some(f), Some((d, first))) = (&rec.features, *dim) {
        if d != f.len() {
            return Err(Error::Dataset(format!(
                "line {lineno}: feature dimension {} differs from {d} declared on line {first}",
                f.len()
            )));
        }
    }
    if let Some(prev) = index.get(&rec.session_id).and_then(|&s| sessions[s].1.last()) {
        if !(rec.t > prev.t) {
            return Err(Error::Session {
                session: rec.session_id.clone(),
                msg: format!("line {lineno}: timestamp {} not after {}", rec.t, prev.t),
            });
        }
    }
    Ok(rec)
}

pub fn write_dataset(path: impl AsRef<Path>, records: &[FrameRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", record_to_line(r)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn dataset_to_string(records: &[FrameRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&record_to_line(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Which labels the classifier was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Cluster,
    GroundTruth,
}

/// PCA + SVM with the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub pca: PcaModel<f64>,
    pub svm: SvmModel<f64>,
    pub label_source: LabelSource,
    pub config: PipelineConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactFile {
    format_version: u32,
    label_source: LabelSource,
    pca: PcaFile,
    svm: SvmFile,
    config: PipelineConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PcaFile {
    input_dim: usize,
    output_dim: usize,
    mean: Vec<f64>,
    /// output_dim rows of input_dim values.
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
    total_variance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmFile {
    input_dim: usize,
    weights: Vec<f64>,
    bias: f64,
    c: f64,
    positive_weight: f64,
    negative_weight: f64,
}

impl ModelArtifact {
    pub fn to_json(&self) -> Result<String> {
        let pca = &self.pca;
        let file = ArtifactFile {
            format_version: MODEL_FORMAT_VERSION,
            label_source: self.label_source,
            pca: PcaFile {
                input_dim: pca.input_dim(),
                output_dim: pca.output_dim(),
                mean: pca.mean.iter().copied().collect(),
                components: pca
                    .components
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
                explained_variance: pca.explained_variance.iter().copied().collect(),
                total_variance: pca.total_variance,
            },
            svm: SvmFile {
                input_dim: self.svm.weights.len(),
                weights: self.svm.weights.iter().copied().collect(),
                bias: self.svm.bias,
                c: self.svm.c,
                positive_weight: self.svm.class_weights.0,
                negative_weight: self.svm.class_weights.1,
            },
            config: self.config.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let version = v
            .get("format_version")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::InvalidInput("model file lacks format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::UnsupportedVersion(version as u32));
        }
        let f: ArtifactFile = serde_json::from_value(v)?;
        let (d, k) = (f.pca.input_dim, f.pca.output_dim);
        let shape_err = |what: &str| Error::InvalidInput(format!("model file: {what} has the wrong shape"));
        if f.pca.mean.len() != d {
            return Err(shape_err("pca.mean"));
        }
        if f.pca.components.len() != k || f.pca.components.iter().any(|r| r.len() != d) {
            return Err(shape_err("pca.components"));
        }
        if f.pca.explained_variance.len() != k {
            return Err(shape_err("pca.explained_variance"));
        }
        if f.svm.input_dim != k || f.svm.weights.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: f.svm.weights.len(),
            });
        }
        let pca = PcaModel {
            mean: DVector::from_vec(f.pca.mean),
            components: DMatrix::from_fn(k, d, |r, c| f.pca.components[r][c]),
            explained_variance: DVector::from_vec(f.pca.explained_variance),
            total_variance: f.pca.total_variance,
        };
        let svm = SvmModel {
            weights: DVector::from_vec(f.svm.weights),
            bias: f.svm.bias,
            c: f.svm.c,
            class_weights: (f.svm.positive_weight, f.svm.negative_weight),
        };
        f.config.validate()?;
        Ok(Self {
            pca,
            svm,
            label_source: f.label_source,
            config: f.config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Eye-contact decision for a raw feature vector: (label, SVM score).
    pub fn predict(&self, features: &[f64]) -> Result<(Label, f64)> {
        let z = self.pca.project(features)?;
        let (sign, score) = self.svm.predict(z.as_slice())?;
        Ok((Label::from_positive(sign > 0), score))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> FrameRecord {
        let mut r = FrameRecord::no_face("s1", "p1", 0.0, 640, 480);
        r.face_detected = true;
        r.face_confidence = Some(0.95);
        r.landmarks = Some((0..68).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect());
        r.features = Some(vec![1.0, 2.0, 3.0]);
        r.gaze = Some(GazeAngles::new(0.1, -0.2));
        r.label = Some(Label::Contact);
        r
    }

    #[test]
    fn three_lines_in_order() {
        let mut text = String::new();
        for t in [0.0, 0.5, 1.0] {
            let mut r = base();
            r.t = t;
            text += &(record_to_line(&r).unwrap() + "\n");
        }
        let recs = parse_dataset(&text).unwrap();
        assert_eq!(recs.iter().map(|r| r.t).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn absent_fields_are_omitted() {
        let line = record_to_line(&FrameRecord::no_face("s", "p", 1.0, 10, 10)).unwrap();
        assert!(!line.contains("null"));
        assert!(!line.contains("landmarks"));
    }

    #[test]
    fn sixty_seven_landmarks_rejected_with_line() {
        let good = record_to_line(&base()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&good).unwrap();
        v["landmarks"] = serde_json::Value::Array(v["landmarks"].as_array().unwrap()[..134].to_vec());
        v["t"] = serde_json::json!(1.0);
        let text = format!("{good}\n{v}\n");
        let err = parse_dataset(&text).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 2, .. }), "{err}");
    }

    #[test]
    fn mixed_feature_dims_rejected() {
        let mut a = base();
        a.features = Some(vec![0.0; 4096]);
        let mut b = base();
        b.t = 1.0;
        b.features = Some(vec![0.0; 512]);
        let text = format!("{}\n{}\n", record_to_line(&a).unwrap(), record_to_line(&b).unwrap());
        assert!(matches!(parse_dataset(&text), Err(Error::Dataset(_))));
    }

    #[test]
    fn non_monotonic_names_session() {
        let mut a = base();
        a.t = 2.0;
        let mut b = base();
        b.t = 1.0;
        let text = format!("{}\n{}\n", record_to_line(&a).unwrap(), record_to_line(&b).unwrap());
        match parse_dataset(&text) {
            Err(Error::Session { session, .. }) => assert_eq!(session, "s1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_face_with_landmarks_rejected() {
        let mut r = base();
        r.face_detected = false;
        let text = record_to_line(&r).unwrap();
        assert!(matches!(parse_dataset(&text), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn confidence_out_of_range_rejected() {
        let mut r = base();
        r.face_confidence = Some(1.5);
        assert!(parse_dataset(&record_to_line(&r).unwrap()).is_err());
    }

    #[test]
    fn sessions_grouped_by_first_appearance() {
        let mk = |s: &str, t: f64| {
            let mut r = base();
            r.session_id = s.into();
            r.t = t;
            record_to_line(&r).unwrap()
        };
        let text = [mk("b", 0.0), mk("a", 0.0), mk("b", 1.0)].join("\n");
        let recs = parse_dataset(&text).unwrap();
        let ids: Vec<_> = recs.iter().map(|r| (r.session_id.as_str(), r.t)).collect();
        assert_eq!(ids, vec![("b", 0.0), ("b", 1.0), ("a", 0.0)]);
    }

    #[test]
    fn empty_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        write_dataset(&p, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "");
        assert!(read_dataset(&p).unwrap().is_empty());
    }

    #[test]
    fn unknown_model_version_refused() {
        let text = r#"{"format_version": 99}"#;
        assert!(matches!(ModelArtifact::from_json(text), Err(Error::UnsupportedVersion(99))));
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub session_id: String,
    pub participant_id: String,
    pub t: f64,
    pub prediction: Label,
    /// SVM decision value; absent when no face was detected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Ground truth copied from the input record, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illumination: Option<String>,
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_predictions(path: impl AsRef<Path>, preds: &[PredictionRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in preds {
        writeln!(w, "{}", serde_json::to_string(p)?)?;
    }
    w.flush()?;
    Ok(())
}
